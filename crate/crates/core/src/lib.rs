//! Parallel resampling for sequential Monte Carlo.
//!
//! The crate implements Megopolis, a Metropolis-style resampler whose
//! comparison reads are coalesced into one aligned block per warp, together
//! with the algorithms it is measured against (Metropolis, the partitioned
//! C1/C2 variants, multinomial and systematic resampling). Around them sit
//! the tools for judging them:
//!
//! - [`rng`]: counter-based streams, so every run is reproducible from a seed;
//! - [`weights`]: benchmark weight families and the iteration budget `B`;
//! - [`resample`]: the resamplers and ancestor/offspring conversions;
//! - [`warpsim`]: a segment-transaction model of warp memory traffic;
//! - [`metrics`]: MSE, bias and variance of offspring counts, RMSE;
//! - [`pfilter`]: a bootstrap particle filter benchmark;
//! - [`io`]: binary and CSV formats for weights, ancestors and offspring.
//!
//! ```
//! use megopolis::resample::{ancestors_to_offspring, megopolis, WarpConfig};
//! use megopolis::weights::{gen_gaussian_weights, iterations_for, GaussianWeightParams, Precision};
//!
//! let w = gen_gaussian_weights(GaussianWeightParams { y: 2.0, n: 1024 }, Precision::Single, 1)?;
//! let budget = iterations_for(&w, 0.01)?;
//! let ancestors = megopolis(&w, budget.iterations, WarpConfig::default(), 7)?;
//! let offspring = ancestors_to_offspring(&ancestors);
//! assert_eq!(offspring.as_slice().iter().map(|&c| c as usize).sum::<usize>(), 1024);
//! # Ok::<(), megopolis::Error>(())
//! ```

mod error;
pub mod io;
pub mod metrics;
pub mod pfilter;
pub mod resample;
pub mod rng;
pub mod scan;
pub mod warpsim;
pub mod weights;

pub use error::{Error, Result};
pub use resample::{Algorithm, AncestorVector, OffspringVector, Resampler, WarpConfig};
pub use weights::{Precision, WeightVector};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/randomness.md")]
    mod randomness {}
    #[doc = include_str!("../../../book/src/weights.md")]
    mod weights {}
    #[doc = include_str!("../../../book/src/resamplers.md")]
    mod resamplers {}
    #[doc = include_str!("../../../book/src/traffic.md")]
    mod traffic {}
    #[doc = include_str!("../../../book/src/quality.md")]
    mod quality {}
    #[doc = include_str!("../../../book/src/particle-filter.md")]
    mod particle_filter {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
