//! Resampling quality grid.

use std::time::Instant;

use anyhow::Result;
use megopolis::metrics::{QualityAccumulator, QualityStats};
use megopolis::resample::ancestors_to_offspring;
use megopolis::rng::derive_seed;
use megopolis::weights::compute_iterations;
use megopolis::{Algorithm, Resampler};
use serde::{Deserialize, Serialize};

use crate::experiment::{generate, sequence_seed, text, ExperimentSpec, WeightFamily};

/// One grid point, averaged over its weight sequences. Per-sequence
/// statistics are computed first and then averaged; the `_se` columns are
/// standard errors across sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityRow {
    #[serde(with = "text")]
    pub algorithm: Algorithm,
    pub n: usize,
    pub family: WeightFamily,
    pub param: f64,
    pub precision: String,
    pub epsilon: f64,
    pub runs: usize,
    pub sequences: usize,
    pub seed: u64,
    pub iterations_mean: f64,
    pub mse_per_particle: f64,
    pub mse_per_particle_se: f64,
    pub variance_per_particle: f64,
    pub bias_sq_per_particle: f64,
    pub bias_contribution: f64,
    pub bias_contribution_se: f64,
    pub seconds: Option<f64>,
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Quality statistics of every sequence at one grid point, with the budget each used.
pub fn point_stats(
    spec: &ExperimentSpec,
    algorithm: Algorithm,
    n: usize,
    param: f64,
) -> Result<Vec<(QualityStats, usize)>> {
    let warp = spec.warp();
    (0..spec.sequences)
        .map(|s| {
            let seq_seed = sequence_seed(spec.seed, spec.family, n, param, s);
            let w = generate(spec.family, param, spec.beta, n, spec.precision, seq_seed)?;
            let b = match spec.iterations {
                Some(b) => b,
                None if algorithm.is_iterative() => compute_iterations(spec.epsilon, w.mean(), w.max())?.iterations,
                None => 0,
            };
            let resampler = Resampler::new(algorithm, b).with_warp(warp);
            let mut acc = QualityAccumulator::new(&w)?;
            let run_seed = derive_seed(seq_seed, 0x5255_4e53);
            for k in 0..spec.runs {
                let a = resampler.resample(&w, derive_seed(run_seed, k as u64))?;
                acc.push(&ancestors_to_offspring(&a))?;
            }
            Ok((acc.finish()?, b))
        })
        .collect()
}

pub fn quality_point(spec: &ExperimentSpec, algorithm: Algorithm, n: usize, param: f64) -> Result<QualityRow> {
    let start = Instant::now();
    let stats = point_stats(spec, algorithm, n, param)?;
    let seconds = start.elapsed().as_secs_f64();
    let per = |f: fn(&QualityStats) -> f64| mean_se(&stats.iter().map(|(q, _)| f(q)).collect::<Vec<_>>());
    let nf = n as f64;
    let (mse, mse_se) = per(|q| q.mse_per_particle);
    let (bc, bc_se) = per(|q| q.bias_contribution);
    Ok(QualityRow {
        algorithm,
        n,
        family: spec.family,
        param,
        precision: spec.precision.to_string(),
        epsilon: spec.epsilon,
        runs: spec.runs,
        sequences: spec.sequences,
        seed: spec.seed,
        iterations_mean: stats.iter().map(|(_, b)| *b as f64).sum::<f64>() / stats.len() as f64,
        mse_per_particle: mse,
        mse_per_particle_se: mse_se,
        variance_per_particle: per(|q| q.variance).0 / nf,
        bias_sq_per_particle: per(|q| q.bias_sq).0 / nf,
        bias_contribution: bc,
        bias_contribution_se: bc_se,
        seconds: spec.timings.then_some(seconds),
    })
}

/// Every (algorithm, N, parameter) point in grid order.
pub fn run_quality(spec: &ExperimentSpec) -> Result<Vec<QualityRow>> {
    let mut rows = Vec::new();
    for &alg in &spec.algorithms {
        for &n in &spec.n_grid {
            for &param in &spec.params {
                rows.push(quality_point(spec, alg, n, param)?);
            }
        }
    }
    Ok(rows)
}
