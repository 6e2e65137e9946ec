//! Memory-traffic grid.

use anyhow::Result;
use megopolis::rng::derive_seed;
use megopolis::warpsim::measure_traffic;
use megopolis::weights::compute_iterations;
use megopolis::Algorithm;
use serde::{Deserialize, Serialize};

use crate::experiment::{generate, sequence_seed, text, ExperimentSpec, WeightFamily};

/// Modelled weight-read traffic of one resampler on the first weight
/// sequence of a grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficRow {
    #[serde(with = "text")]
    pub algorithm: Algorithm,
    pub n: usize,
    pub family: WeightFamily,
    pub param: f64,
    pub precision: String,
    pub iterations: usize,
    pub seed: u64,
    pub warps_sampled: usize,
    pub mean_transactions: f64,
    pub per_warp_max: usize,
    pub unnecessary_words_per_read: f64,
    /// Random numbers each particle generates per iteration.
    pub rng_draws_per_iteration: f64,
}

/// `None` for resamplers without a comparison phase.
pub fn traffic_point(spec: &ExperimentSpec, algorithm: Algorithm, n: usize, param: f64) -> Result<Option<TrafficRow>> {
    if !algorithm.is_iterative() {
        return Ok(None);
    }
    let warp = spec.warp();
    let seq_seed = sequence_seed(spec.seed, spec.family, n, param, 0);
    let w = generate(spec.family, param, spec.beta, n, spec.precision, seq_seed)?;
    let b = match spec.iterations {
        Some(b) => b,
        None => compute_iterations(spec.epsilon, w.mean(), w.max())?.iterations,
    };
    let report = measure_traffic(algorithm, &w, b, warp, derive_seed(seq_seed, 0x5255_4e53), spec.warp_sample)?;
    Ok(Some(TrafficRow {
        algorithm,
        n,
        family: spec.family,
        param,
        precision: spec.precision.to_string(),
        iterations: b,
        seed: spec.seed,
        warps_sampled: (report.accesses / b as u64) as usize,
        mean_transactions: report.per_iteration_mean,
        per_warp_max: report.per_warp_max,
        unnecessary_words_per_read: report.unnecessary_words as f64 / report.accesses as f64,
        rng_draws_per_iteration: algorithm.draws_per_iteration(),
    }))
}

pub fn run_traffic(spec: &ExperimentSpec) -> Result<Vec<TrafficRow>> {
    let mut rows = Vec::new();
    for &alg in &spec.algorithms {
        for &n in &spec.n_grid {
            for &param in &spec.params {
                rows.extend(traffic_point(spec, alg, n, param)?);
            }
        }
    }
    Ok(rows)
}
