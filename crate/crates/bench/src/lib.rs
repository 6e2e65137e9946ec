//! Experiment grids and result files behind the `megobench` command.
//!
//! Every grid point derives its random streams from the base seed and its
//! own coordinates, so any row can be recomputed on its own and reruns with
//! the same seed write byte-identical files. Wall-clock columns stay empty
//! unless timings are requested.

pub mod experiment;
pub mod output;
pub mod pf;
pub mod plotdata;
pub mod quality;
pub mod traffic;

pub use experiment::{ExperimentSpec, Overrides, Profile, WeightFamily};
pub use output::Table;
