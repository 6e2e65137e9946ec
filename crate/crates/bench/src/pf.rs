//! End-to-end particle-filter grid.

use anyhow::Result;
use megopolis::pfilter::{generate_trajectory, run_benchmark, FilterConfig, IterationPolicy, Trajectory};
use megopolis::rng::derive_seed;
use megopolis::Algorithm;
use serde::{Deserialize, Serialize};

use crate::experiment::{text, ExperimentSpec};
use crate::quality::mean_se;

/// RMSE of one filter configuration over every trajectory and run. The
/// `iterations` column is empty when the budget is chosen at runtime; timing
/// columns are empty unless timings were requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfRow {
    #[serde(with = "text")]
    pub algorithm: Algorithm,
    pub particles: usize,
    pub steps: usize,
    pub trajectories: usize,
    pub runs: usize,
    pub iterations: Option<usize>,
    pub seed: u64,
    pub rmse: f64,
    pub rmse_se: f64,
    pub mean_iterations: f64,
    pub predict_seconds: Option<f64>,
    pub resample_seconds: Option<f64>,
    pub estimate_seconds: Option<f64>,
    pub resample_ratio: Option<f64>,
}

pub fn trajectories(spec: &ExperimentSpec) -> Result<Vec<Trajectory>> {
    let cfg = FilterConfig::new(1, Algorithm::Systematic, IterationPolicy::Fixed(1));
    (0..spec.trajectories)
        .map(|k| {
            let seed = derive_seed(derive_seed(spec.seed, 0x5452_414a), k as u64);
            Ok(generate_trajectory(spec.steps, 0.0, cfg.process_var, cfg.obs_var, seed)?)
        })
        .collect()
}

pub fn pf_point(spec: &ExperimentSpec, trajs: &[Trajectory], algorithm: Algorithm, b: Option<usize>) -> Result<PfRow> {
    let policy = b.map_or_else(IterationPolicy::default, IterationPolicy::Fixed);
    let cfg = FilterConfig::new(spec.particles, algorithm, policy);
    let res = run_benchmark(&cfg, trajs, spec.filter_runs, derive_seed(spec.seed, 0x4649_4c54))?;
    let secs = |d: std::time::Duration| spec.timings.then_some(d.as_secs_f64());
    Ok(PfRow {
        algorithm,
        particles: spec.particles,
        steps: spec.steps,
        trajectories: spec.trajectories,
        runs: spec.filter_runs,
        iterations: b,
        seed: spec.seed,
        rmse: res.rmse,
        rmse_se: mean_se(&res.rmse_per_trajectory).1,
        mean_iterations: res.mean_iterations,
        predict_seconds: secs(res.timings.stage1),
        resample_seconds: secs(res.timings.stage2),
        estimate_seconds: secs(res.timings.stage3),
        resample_ratio: if spec.timings { res.resample_ratio } else { None },
    })
}

/// Every (algorithm, B) point; a single runtime-policy point per algorithm
/// when the budget grid is empty.
pub fn run_pf(spec: &ExperimentSpec) -> Result<Vec<PfRow>> {
    let trajs = trajectories(spec)?;
    let budgets: Vec<Option<usize>> =
        if spec.b_grid.is_empty() { vec![None] } else { spec.b_grid.iter().copied().map(Some).collect() };
    let mut rows = Vec::new();
    for &alg in &spec.algorithms {
        for &b in &budgets {
            rows.push(pf_point(spec, &trajs, alg, b)?);
        }
    }
    Ok(rows)
}
