//! Bootstrap (SIR) particle filter on the univariate nonlinear growth model
//!
//! ```text
//! x_t = x_{t-1}/2 + 25 x_{t-1}/(1 + x_{t-1}^2) + 8 cos(1.2 t) + v_{t-1}
//! z_t = x_t^2 / 20 + n_t
//! ```
//!
//! with Gaussian `v` and `n`. Weights are never normalised; the estimate is
//! the mean of the resampled particles. The first transition uses `t = 1`.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::metrics::{self, RunTimings};
use crate::resample::{apply_ancestors, Algorithm, Resampler, WarpConfig};
use crate::rng::{derive_seed, Lane};
use crate::scan::tree_sum;
use crate::weights::{compute_iterations, estimate_ratio, Precision, WeightVector};

const DOMAIN_TRUTH: u64 = 0x5452_5554_48;
const DOMAIN_INIT: u64 = 0x494e_4954;
const DOMAIN_PROCESS: u64 = 0x5052_4f43;
const DOMAIN_RESAMPLE: u64 = 0x5253_4d50;
const DOMAIN_RUN: u64 = 0x5255_4e53;

/// How the iteration budget of Metropolis-family resamplers is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IterationPolicy {
    Fixed(usize),
    /// Recompute before every resampling stage from a strided subset of the
    /// weights.
    Runtime { epsilon: f64, subset: usize },
}

impl Default for IterationPolicy {
    fn default() -> Self {
        IterationPolicy::Runtime { epsilon: 0.1, subset: 4096 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub n_particles: usize,
    pub process_var: f64,
    pub obs_var: f64,
    pub resampler: Algorithm,
    pub warp: WarpConfig,
    pub policy: IterationPolicy,
    /// Precision of the particle weights handed to the resampler.
    pub precision: Precision,
}

impl FilterConfig {
    pub fn new(n_particles: usize, resampler: Algorithm, policy: IterationPolicy) -> Self {
        Self {
            n_particles,
            process_var: 10.0,
            obs_var: 1.0,
            resampler,
            warp: WarpConfig::default(),
            policy,
            precision: Precision::Double,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return invalid("filter needs at least one particle");
        }
        if !(self.process_var >= 0.0 && self.obs_var > 0.0) {
            return invalid(format!(
                "process variance must be >= 0 and observation variance > 0, got {} and {}",
                self.process_var, self.obs_var
            ));
        }
        match self.policy {
            IterationPolicy::Fixed(0) => invalid("fixed iteration budget must be >= 1"),
            IterationPolicy::Runtime { epsilon, subset } if !(epsilon > 0.0 && epsilon <= 1.0) || subset == 0 => {
                invalid("runtime budget needs epsilon in (0, 1] and a non-empty subset")
            }
            _ => Ok(()),
        }
    }
}

/// Deterministic part of the state transition plus additive noise `v`.
pub fn transition(x: f64, t: usize, v: f64) -> f64 {
    x / 2.0 + 25.0 * x / (1.0 + x * x) + 8.0 * (1.2 * t as f64).cos() + v
}

/// Measurement model without noise.
pub fn observe(x: f64) -> f64 {
    x * x / 20.0
}

/// Gaussian density of the residual `z - x^2/20`.
pub fn likelihood(z: f64, x: f64, obs_var: f64) -> f64 {
    let r = z - observe(x);
    (-0.5 * r * r / obs_var).exp() / (std::f64::consts::TAU * obs_var).sqrt()
}

/// Ground truth states and their noisy measurements, `t = 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub truth: Vec<f64>,
    pub observations: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }
}

pub fn generate_trajectory(
    steps: usize,
    x0: f64,
    process_var: f64,
    obs_var: f64,
    seed: u64,
) -> Result<Trajectory> {
    if steps == 0 {
        return invalid("trajectory needs at least one step");
    }
    if !(process_var >= 0.0 && obs_var >= 0.0) {
        return invalid("noise variances must be non-negative");
    }
    let seed = derive_seed(seed, DOMAIN_TRUTH);
    let (process, measure) = (Lane::new(seed, 0), Lane::new(seed, 1));
    let (sv, sn) = (process_var.sqrt(), obs_var.sqrt());
    let mut x = x0;
    let mut truth = Vec::with_capacity(steps);
    let mut observations = Vec::with_capacity(steps);
    for t in 1..=steps {
        x = transition(x, t, sv * process.standard_normal(t as u64));
        truth.push(x);
        observations.push(observe(x) + sn * measure.standard_normal(t as u64));
    }
    Ok(Trajectory { truth, observations })
}

/// Particle cloud after the latest resampling stage.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub particles: Vec<f64>,
    pub estimate: f64,
    /// Index of the last processed measurement; 0 before the first step.
    pub t: usize,
    pub timings: RunTimings,
    /// Iteration budget used by the last resampling stage.
    pub iterations: usize,
}

impl FilterState {
    /// `x_0 ~ N(0, process_var)` for every particle.
    pub fn initial(cfg: &FilterConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let seed = derive_seed(seed, DOMAIN_INIT);
        let sd = cfg.process_var.sqrt();
        let particles: Vec<f64> = (0..cfg.n_particles as u64)
            .map(|i| sd * Lane::new(seed, i).standard_normal(0))
            .collect();
        let estimate = ensemble_mean(&particles);
        Ok(Self { particles, estimate, t: 0, timings: RunTimings::default(), iterations: 0 })
    }

    /// State with every particle at `x`.
    pub fn uniform(x: f64, n: usize) -> Self {
        Self { particles: vec![x; n], estimate: x, t: 0, timings: RunTimings::default(), iterations: 0 }
    }
}

/// Point estimate of the state: the mean of the resampled ensemble.
pub fn ensemble_mean(particles: &[f64]) -> f64 {
    tree_sum(particles) / particles.len() as f64
}

/// Predict, weight, resample and estimate for the next measurement `z`.
pub fn sir_step(state: &FilterState, z: f64, cfg: &FilterConfig, seed: u64) -> Result<FilterState> {
    cfg.validate()?;
    if state.particles.len() != cfg.n_particles {
        return invalid(format!(
            "state holds {} particles, configuration expects {}",
            state.particles.len(),
            cfg.n_particles
        ));
    }
    let t = state.t + 1;
    let noise_seed = derive_seed(derive_seed(seed, DOMAIN_PROCESS), t as u64);
    let resample_seed = derive_seed(derive_seed(seed, DOMAIN_RESAMPLE), t as u64);
    let sv = cfg.process_var.sqrt();

    let start = Instant::now();
    let (predicted, weights): (Vec<f64>, Vec<f64>) = state
        .particles
        .par_iter()
        .with_min_len(1024)
        .enumerate()
        .map(|(i, &x)| {
            let v = if sv > 0.0 { sv * Lane::new(noise_seed, i as u64).standard_normal(0) } else { 0.0 };
            let xp = transition(x, t, v);
            (xp, likelihood(z, xp, cfg.obs_var))
        })
        .unzip();
    let weights = WeightVector::new(weights, cfg.precision)?;
    let stage1 = start.elapsed();

    let start = Instant::now();
    let iterations = match cfg.policy {
        _ if !cfg.resampler.is_iterative() => 0,
        IterationPolicy::Fixed(b) => b,
        IterationPolicy::Runtime { epsilon, subset } => {
            let ratio = estimate_ratio(&weights, subset.min(cfg.n_particles), resample_seed)?;
            compute_iterations(epsilon, ratio, 1.0)?.iterations
        }
    };
    let ancestors = Resampler::new(cfg.resampler, iterations)
        .with_warp(cfg.warp)
        .resample(&weights, resample_seed)?;
    let particles = apply_ancestors(&predicted, &ancestors)?;
    let stage2 = start.elapsed();

    let start = Instant::now();
    let estimate = ensemble_mean(&particles);
    let stage3 = start.elapsed();

    Ok(FilterState {
        particles,
        estimate,
        t,
        timings: state.timings + RunTimings { stage1, stage2, stage3 },
        iterations,
    })
}

/// Estimates and timings of one filter pass over a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterRun {
    pub estimates: Vec<f64>,
    pub timings: RunTimings,
    pub mean_iterations: f64,
}

pub fn run_filter(cfg: &FilterConfig, trajectory: &Trajectory, seed: u64) -> Result<FilterRun> {
    let mut state = FilterState::initial(cfg, seed)?;
    let mut estimates = Vec::with_capacity(trajectory.len());
    let mut iterations = 0usize;
    for &z in &trajectory.observations {
        state = sir_step(&state, z, cfg, seed)?;
        estimates.push(state.estimate);
        iterations += state.iterations;
    }
    Ok(FilterRun {
        estimates,
        timings: state.timings,
        mean_iterations: iterations as f64 / trajectory.len().max(1) as f64,
    })
}

/// Accuracy and timing of one filter configuration over a set of
/// trajectories and Monte Carlo runs.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    /// Mean over trajectories of the per-trajectory RMSE across runs.
    pub rmse: f64,
    pub rmse_per_trajectory: Vec<f64>,
    pub timings: RunTimings,
    /// Resample share of the summed stage times; `None` if nothing was timed.
    pub resample_ratio: Option<f64>,
    pub mean_iterations: f64,
}

pub fn run_benchmark(
    cfg: &FilterConfig,
    trajectories: &[Trajectory],
    runs: usize,
    seed: u64,
) -> Result<BenchmarkResult> {
    if trajectories.is_empty() || runs == 0 {
        return invalid("benchmark needs at least one trajectory and one run");
    }
    let mut timings = RunTimings::default();
    let mut rmse_per_trajectory = Vec::with_capacity(trajectories.len());
    let mut iterations = 0.0;
    for (ti, traj) in trajectories.iter().enumerate() {
        let mut estimates = Vec::with_capacity(runs);
        for k in 0..runs {
            let run_seed = derive_seed(derive_seed(seed, DOMAIN_RUN), (ti * runs + k) as u64);
            let run = run_filter(cfg, traj, run_seed)?;
            timings += run.timings;
            iterations += run.mean_iterations;
            estimates.push(run.estimates);
        }
        rmse_per_trajectory.push(metrics::rmse(&traj.truth, &estimates)?);
    }
    let rmse = rmse_per_trajectory.iter().sum::<f64>() / rmse_per_trajectory.len() as f64;
    Ok(BenchmarkResult {
        rmse,
        rmse_per_trajectory,
        timings,
        resample_ratio: metrics::resample_ratio(&timings).ok(),
        mean_iterations: iterations / (trajectories.len() * runs) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_examples() {
        assert!((transition(0.0, 1, 0.0) - 8.0 * 1.2f64.cos()).abs() < 1e-12);
        assert!((transition(0.0, 1, 0.0) - 2.8989).abs() < 1e-4);
        assert_eq!(transition(1.0, 0, 0.0), 21.0);
    }

    #[test]
    fn likelihood_examples() {
        let peak = likelihood(observe(3.0), 3.0, 1.0);
        assert!((peak - 0.398_942_28).abs() < 1e-8);
        let off = likelihood(observe(3.0) + 1.0, 3.0, 1.0);
        assert!((off - 0.241_970_72).abs() < 1e-8);
        assert_eq!(likelihood(2.0, 1.7, 1.0), likelihood(2.0, -1.7, 1.0));
    }

    #[test]
    fn noiseless_trajectory() {
        let traj = generate_trajectory(5, 0.0, 0.0, 0.0, 1).unwrap();
        let mut x = 0.0;
        for t in 1..=5 {
            x = transition(x, t, 0.0);
            assert_eq!(traj.truth[t - 1], x);
            assert_eq!(traj.observations[t - 1], observe(x));
        }
        assert!((traj.truth[0] - 2.8989).abs() < 1e-4);
    }

    #[test]
    fn trajectories_are_reproducible() {
        let a = generate_trajectory(50, 0.0, 10.0, 1.0, 4).unwrap();
        assert_eq!(a, generate_trajectory(50, 0.0, 10.0, 1.0, 4).unwrap());
        assert_ne!(a, generate_trajectory(50, 0.0, 10.0, 1.0, 5).unwrap());
        assert!(generate_trajectory(0, 0.0, 10.0, 1.0, 4).is_err());
    }

    #[test]
    fn observation_noise_variance() {
        let traj = generate_trajectory(10_000, 0.0, 10.0, 1.0, 8).unwrap();
        let res: Vec<f64> = traj.truth.iter().zip(&traj.observations).map(|(x, z)| z - observe(*x)).collect();
        let m = res.iter().sum::<f64>() / res.len() as f64;
        let v = res.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / (res.len() - 1) as f64;
        assert!((v - 1.0).abs() < 0.05, "variance {v}");
    }

    #[test]
    fn degenerate_ensemble_follows_map() {
        let mut cfg = FilterConfig::new(64, Algorithm::Megopolis, IterationPolicy::Fixed(8));
        cfg.process_var = 0.0;
        let state = FilterState::uniform(1.5, 64);
        let next = sir_step(&state, 3.0, &cfg, 9).unwrap();
        assert!((next.estimate - transition(1.5, 1, 0.0)).abs() < 1e-12);
        assert_eq!(next.t, 1);
    }

    #[test]
    fn systematic_on_identical_particles_is_pure_propagation() {
        let mut cfg = FilterConfig::new(64, Algorithm::Systematic, IterationPolicy::Fixed(1));
        cfg.process_var = 0.0;
        let next = sir_step(&FilterState::uniform(-2.0, 64), 0.7, &cfg, 1).unwrap();
        assert_eq!(next.particles, vec![transition(-2.0, 1, 0.0); 64]);
    }

    #[test]
    fn filter_runs_without_degeneration() {
        let traj = generate_trajectory(100, 0.0, 10.0, 1.0, 2).unwrap();
        for alg in [Algorithm::Megopolis, Algorithm::Systematic, Algorithm::Metropolis] {
            let cfg = FilterConfig::new(1024, alg, IterationPolicy::default());
            let run = run_filter(&cfg, &traj, 3).unwrap();
            assert_eq!(run.estimates.len(), 100);
            assert!(run.estimates.iter().all(|e| e.is_finite()));
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = FilterConfig::new(0, Algorithm::Megopolis, IterationPolicy::Fixed(4));
        assert!(cfg.validate().is_err());
        cfg.n_particles = 32;
        cfg.obs_var = 0.0;
        assert!(cfg.validate().is_err());
        cfg.obs_var = 1.0;
        cfg.policy = IterationPolicy::Fixed(0);
        assert!(cfg.validate().is_err());
    }
}
