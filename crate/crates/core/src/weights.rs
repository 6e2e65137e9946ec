//! Benchmark weight families, the iteration budget and its convergence
//! recurrence.

use rand_distr::{Distribution, Gamma};

use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, Lane};

const DOMAIN_GAUSSIAN: u64 = 0x5747_4155_5353;
const DOMAIN_GAMMA: u64 = 0x5747_414d_4d41;
const DOMAIN_SUBSET: u64 = 0x5753_5542_5345;

/// Storage precision of a weight vector. Values are always held as `f64`;
/// in single precision every value is exactly representable as `f32` and
/// prefix sums are accumulated in `f32`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Precision {
    #[default]
    Single,
    Double,
}

impl Precision {
    pub fn word_bytes(self) -> usize {
        match self {
            Precision::Single => 4,
            Precision::Double => 8,
        }
    }

    fn round(self, v: f64) -> f64 {
        match self {
            Precision::Single => v as f32 as f64,
            Precision::Double => v,
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" | "f32" => Ok(Precision::Single),
            "double" | "f64" => Ok(Precision::Double),
            _ => invalid(format!("unknown precision {s:?}")),
        }
    }
}

impl std::fmt::Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Precision::Single => "single",
            Precision::Double => "double",
        })
    }
}

/// Non-negative, finite, possibly unnormalised particle weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    values: Vec<f64>,
    precision: Precision,
}

impl WeightVector {
    /// Validates and stores `values`, rounding them to `precision`.
    pub fn new(values: Vec<f64>, precision: Precision) -> Result<Self> {
        if values.is_empty() {
            return invalid("weight vector must hold at least one value");
        }
        if let Some((i, w)) = values
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return invalid(format!("weight {i} is {w}; weights must be finite and >= 0"));
        }
        let values = values.into_iter().map(|v| precision.round(v)).collect();
        Ok(Self { values, precision })
    }

    pub fn double(values: Vec<f64>) -> Result<Self> {
        Self::new(values, Precision::Double)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_precision(&self, precision: Precision) -> Self {
        Self {
            values: self.values.iter().map(|&v| precision.round(v)).collect(),
            precision,
        }
    }

    /// Sum accumulated in double precision.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.total() / self.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &w) in self.values.iter().enumerate() {
            if w > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub(crate) fn require_positive_mass(&self) -> Result<()> {
        if self.values.iter().all(|&w| w == 0.0) {
            Err(Error::ZeroWeights)
        } else {
            Ok(())
        }
    }
}

/// `w = exp(-(x - y)^2 / 2) / sqrt(2 pi)` with `x ~ N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianWeightParams {
    pub y: f64,
    pub n: usize,
}

/// `w ~ Gamma(shape = alpha, rate = beta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaWeightParams {
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
}

/// Peak value of the Gaussian weight family, `1 / sqrt(2 pi)`.
pub fn gaussian_weight_peak() -> f64 {
    1.0 / (2.0 * std::f64::consts::PI).sqrt()
}

/// Population mean of the Gaussian weight family, `exp(-y^2 / 4) / sqrt(4 pi)`.
pub fn gaussian_weight_mean(y: f64) -> f64 {
    (-y * y / 4.0).exp() / (4.0 * std::f64::consts::PI).sqrt()
}

/// Gaussian-family weight for a given standard-normal draw `x`.
pub fn gaussian_weight(x: f64, y: f64) -> f64 {
    gaussian_weight_peak() * (-0.5 * (x - y) * (x - y)).exp()
}

pub fn gen_gaussian_weights(
    params: GaussianWeightParams,
    precision: Precision,
    seed: u64,
) -> Result<WeightVector> {
    if params.n == 0 {
        return invalid("particle count must be >= 1");
    }
    if !(params.y.is_finite() && params.y >= 0.0) {
        return invalid(format!("y must be finite and >= 0, got {}", params.y));
    }
    let seed = derive_seed(seed, DOMAIN_GAUSSIAN);
    let values = (0..params.n as u64)
        .map(|i| gaussian_weight(Lane::new(seed, i).standard_normal(0), params.y))
        .collect();
    WeightVector::new(values, precision)
}

pub fn gen_gamma_weights(
    params: GammaWeightParams,
    precision: Precision,
    seed: u64,
) -> Result<WeightVector> {
    if params.n == 0 {
        return invalid("particle count must be >= 1");
    }
    if !(params.alpha > 0.0 && params.alpha.is_finite()) {
        return invalid(format!("gamma shape must be > 0, got {}", params.alpha));
    }
    if !(params.beta > 0.0 && params.beta.is_finite()) {
        return invalid(format!("gamma rate must be > 0, got {}", params.beta));
    }
    let gamma = Gamma::new(params.alpha, 1.0 / params.beta)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let seed = derive_seed(seed, DOMAIN_GAMMA);
    let values = (0..params.n as u64)
        .map(|i| {
            let mut rng = Lane::new(seed, i).cursor(0);
            // Single-precision rounding can flush tiny draws to zero at small
            // alpha; keep the family strictly positive.
            gamma.sample(&mut rng).max(f32::MIN_POSITIVE as f64)
        })
        .collect();
    WeightVector::new(values, precision)
}

/// Number of accept/reject rounds for Metropolis-family resamplers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationBudget {
    pub iterations: usize,
    pub epsilon: f64,
}

/// `B = ceil(ln eps / ln(1 - mean/max))`, never less than one.
pub fn compute_iterations(epsilon: f64, mean_w: f64, max_w: f64) -> Result<IterationBudget> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return invalid(format!("epsilon must lie in (0, 1], got {epsilon}"));
    }
    if !(mean_w > 0.0 && max_w > 0.0 && mean_w.is_finite() && max_w.is_finite()) {
        return invalid(format!("mean ({mean_w}) and max ({max_w}) weights must be positive"));
    }
    if mean_w > max_w {
        return invalid(format!("mean weight {mean_w} exceeds max weight {max_w}"));
    }
    let ratio = mean_w / max_w;
    // ln(1 - 1) = -inf gives 0 rounds; ln eps = 0 likewise.
    let raw = (epsilon.ln() / (-ratio).ln_1p()).ceil();
    let iterations = if raw.is_finite() && raw > 1.0 {
        raw as usize
    } else {
        1
    };
    Ok(IterationBudget { iterations, epsilon })
}

/// Budget from the exact mean and maximum of `weights`.
pub fn iterations_for(weights: &WeightVector, epsilon: f64) -> Result<IterationBudget> {
    weights.require_positive_mass()?;
    compute_iterations(epsilon, weights.mean(), weights.max())
}

/// Estimates `mean / max` from a strided subset of `subset_size` particles
/// starting at a random phase. With `subset_size == n` every particle is
/// visited and the result is exact.
pub fn estimate_ratio(weights: &WeightVector, subset_size: usize, seed: u64) -> Result<f64> {
    let n = weights.len();
    if subset_size == 0 {
        return invalid("subset must be non-empty");
    }
    if subset_size > n {
        return invalid(format!("subset of {subset_size} exceeds {n} particles"));
    }
    let stride = n / subset_size;
    let phase = Lane::new(derive_seed(seed, DOMAIN_SUBSET), 0).below(0, stride as u64) as usize;
    let w = weights.values();
    let (mut sum, mut max) = (0.0f64, 0.0f64);
    for k in 0..subset_size {
        let v = w[phase + k * stride];
        sum += v;
        max = max.max(v);
    }
    if max == 0.0 {
        return Err(Error::ZeroWeights);
    }
    Ok(sum / subset_size as f64 / max)
}

/// Probability that a particle's final ancestor is the heaviest particle
/// after `iterations` rounds, iterating `P_b = 1/N + P_{b-1} (1 - mean/max)`
/// from `P_0 = 0`.
pub fn proposition_recurrence(mean_w: f64, max_w: f64, n: usize, iterations: usize) -> f64 {
    let keep = 1.0 - mean_w / max_w;
    let fresh = 1.0 / n as f64;
    (0..iterations).fold(0.0, |p, _| fresh + p * keep)
}

/// Geometric-sum form of [`proposition_recurrence`].
pub fn proposition_closed_form(mean_w: f64, max_w: f64, n: usize, iterations: usize) -> f64 {
    let r = mean_w / max_w;
    if r == 0.0 {
        return iterations as f64 / n as f64;
    }
    (1.0 - (1.0 - r).powi(iterations as i32)) / (n as f64 * r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_values() {
        assert!(WeightVector::double(vec![]).is_err());
        assert!(WeightVector::double(vec![1.0, -0.5]).is_err());
        assert!(WeightVector::double(vec![f64::NAN]).is_err());
        assert!(WeightVector::double(vec![f64::INFINITY]).is_err());
        assert!(WeightVector::double(vec![0.0, 0.0]).is_ok());
    }

    #[test]
    fn single_precision_rounds() {
        let w = WeightVector::new(vec![0.1], Precision::Single).unwrap();
        assert_eq!(w.values()[0], 0.1f32 as f64);
    }

    #[test]
    fn gaussian_weight_at_peak() {
        assert!((gaussian_weight(0.0, 0.0) - 0.398_942_280_4).abs() < 1e-9);
    }

    #[test]
    fn gaussian_weights_mean_and_max() {
        let n = 1_000_000;
        let w = gen_gaussian_weights(GaussianWeightParams { y: 4.0, n }, Precision::Double, 3).unwrap();
        let expected = gaussian_weight_mean(4.0);
        assert!((expected - 0.005_167).abs() < 1e-6);
        // The weight has a heavy right tail at y = 4, so the sample mean
        // carries a standard error of roughly 3e-5.
        assert!((w.mean() - expected).abs() < 2e-4, "mean {}", w.mean());
        assert!(w.max() <= gaussian_weight_peak());
        assert!(w.max() > 0.39);
        assert!(w.values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn gaussian_weights_are_reproducible() {
        let p = GaussianWeightParams { y: 2.0, n: 1000 };
        assert_eq!(
            gen_gaussian_weights(p, Precision::Single, 9).unwrap(),
            gen_gaussian_weights(p, Precision::Single, 9).unwrap()
        );
        assert_ne!(
            gen_gaussian_weights(p, Precision::Single, 9).unwrap(),
            gen_gaussian_weights(p, Precision::Single, 10).unwrap()
        );
    }

    fn moments(w: &WeightVector) -> (f64, f64) {
        let m = w.mean();
        let v = w.values().iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (w.len() - 1) as f64;
        (m, v)
    }

    #[test]
    fn gamma_moments() {
        let n = 1_000_000;
        let exp1 = gen_gamma_weights(GammaWeightParams { alpha: 1.0, beta: 1.0, n }, Precision::Double, 1).unwrap();
        let (m, _) = moments(&exp1);
        assert!((m - 1.0).abs() < 0.01, "mean {m}");

        let g50 = gen_gamma_weights(GammaWeightParams { alpha: 50.0, beta: 1.0, n }, Precision::Double, 2).unwrap();
        let (m, v) = moments(&g50);
        assert!((m - 50.0).abs() < 0.2, "mean {m}");
        assert!((v - 50.0).abs() < 2.0, "variance {v}");

        for alpha in [0.5, 2.0, 3.0, 10.0] {
            let w = gen_gamma_weights(GammaWeightParams { alpha, beta: 1.0, n: 1000 }, Precision::Single, 5).unwrap();
            assert!(w.values().iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn gamma_rejects_bad_params() {
        assert!(gen_gamma_weights(GammaWeightParams { alpha: 0.0, beta: 1.0, n: 4 }, Precision::Single, 0).is_err());
        assert!(gen_gamma_weights(GammaWeightParams { alpha: 1.0, beta: 0.0, n: 4 }, Precision::Single, 0).is_err());
    }

    #[test]
    fn iteration_budget_examples() {
        assert_eq!(compute_iterations(0.01, 0.5, 1.0).unwrap().iterations, 7);
        assert_eq!(compute_iterations(0.01, 1.0, 1.0).unwrap().iterations, 1);
        assert_eq!(compute_iterations(1.0, 0.3, 1.0).unwrap().iterations, 1);
        let r = gaussian_weight_mean(4.0) / gaussian_weight_peak();
        assert!((r - 0.012_952).abs() < 1e-6);
        assert_eq!(compute_iterations(0.01, r, 1.0).unwrap().iterations, 354);
        assert!(compute_iterations(0.01, 2.0, 1.0).is_err());
        assert!(compute_iterations(0.0, 0.5, 1.0).is_err());
        assert!(compute_iterations(1.5, 0.5, 1.0).is_err());
    }

    #[test]
    fn iteration_budget_is_monotone() {
        let eps = [0.5, 0.1, 0.05, 0.01, 0.001];
        let ratios = [0.9, 0.5, 0.1, 0.01, 0.001];
        for r in ratios {
            let bs: Vec<usize> = eps.iter().map(|&e| compute_iterations(e, r, 1.0).unwrap().iterations).collect();
            assert!(bs.windows(2).all(|p| p[0] <= p[1]), "{bs:?}");
        }
        for e in eps {
            let bs: Vec<usize> = ratios.iter().map(|&r| compute_iterations(e, r, 1.0).unwrap().iterations).collect();
            assert!(bs.windows(2).all(|p| p[0] <= p[1]), "{bs:?}");
        }
    }

    #[test]
    fn ratio_estimates() {
        let w = WeightVector::double(vec![1.0, 3.0, 2.0, 2.0]).unwrap();
        assert_eq!(estimate_ratio(&w, 4, 0).unwrap(), 2.0 / 3.0);
        let flat = WeightVector::double(vec![0.7; 1000]).unwrap();
        assert!((estimate_ratio(&flat, 37, 5).unwrap() - 1.0).abs() < 1e-12);
        assert!(estimate_ratio(&w, 0, 0).is_err());
        assert!(estimate_ratio(&w, 5, 0).is_err());

        let n = 1 << 20;
        let g = gen_gaussian_weights(GaussianWeightParams { y: 2.0, n }, Precision::Double, 77).unwrap();
        let full = g.mean() / g.max();
        for seed in 0..4 {
            let est = estimate_ratio(&g, 4096, seed).unwrap();
            assert!((est / full - 1.0).abs() < 0.2, "estimate {est} vs {full}");
        }
    }

    #[test]
    fn recurrence_examples() {
        assert_eq!(proposition_recurrence(0.3, 1.0, 64, 0), 0.0);
        assert_eq!(proposition_recurrence(0.3, 1.0, 64, 1), 1.0 / 64.0);
        for (mean, max, n) in [(0.3, 1.0, 64), (0.01, 0.4, 1000), (0.9, 1.0, 8)] {
            let budget = compute_iterations(0.01, mean, max).unwrap();
            let p = proposition_recurrence(mean, max, n, budget.iterations);
            let target = (1.0 - 0.01) / (n as f64 * mean / max);
            assert!(p >= target * (1.0 - 1e-12), "{p} < {target}");
        }
    }

    #[test]
    fn recurrence_matches_closed_form() {
        for (mean, max, n) in [(0.3, 1.0, 64), (0.0123, 0.3989, 1 << 14), (1.0, 1.0, 4), (0.5, 2.0, 3)] {
            for b in [0, 1, 2, 7, 50, 354, 2000] {
                let it = proposition_recurrence(mean, max, n, b);
                let cf = proposition_closed_form(mean, max, n, b);
                let rel = if cf == 0.0 { it.abs() } else { ((it - cf) / cf).abs() };
                assert!(rel < 1e-12, "b={b}: {it} vs {cf}");
            }
        }
    }
}
