//! Resampling quality and filter accuracy statistics.
//!
//! Every statistic is accumulated in double precision regardless of the
//! precision of the weights under test.

use std::ops::{Add, AddAssign};
use std::time::Duration;

use crate::error::{invalid, Error, Result};
use crate::resample::OffspringVector;
use crate::weights::WeightVector;

/// Expected offspring `N w_i / sum(w)` of every particle.
pub fn expected_offspring(w: &WeightVector) -> Result<Vec<f64>> {
    let total = w.total();
    if !(total > 0.0) {
        return Err(Error::ZeroWeights);
    }
    let n = w.len() as f64;
    Ok(w.values().iter().map(|&wi| n * wi / total).collect())
}

/// `sum_i (o_i - N w_i / sum(w))^2`.
pub fn squared_error(o: &OffspringVector, w: &WeightVector) -> Result<f64> {
    if o.len() != w.len() {
        return Err(Error::LengthMismatch { expected: w.len(), actual: o.len() });
    }
    let expected = expected_offspring(w)?;
    Ok(squared_error_against(o, &expected))
}

fn squared_error_against(o: &OffspringVector, expected: &[f64]) -> f64 {
    o.as_slice()
        .iter()
        .zip(expected)
        .map(|(&c, &e)| {
            let d = c as f64 - e;
            d * d
        })
        .sum()
}

/// Quality of `K` repeated resamples of one weight vector.
///
/// `variance` is the per-particle offspring variance with a `1/K`
/// normaliser, summed over particles, so that `mse = variance + bias_sq`
/// holds exactly. `sample_variance` is the same sum with `1/(K-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QualityStats {
    pub mse: f64,
    pub variance: f64,
    pub sample_variance: f64,
    pub bias_sq: f64,
    /// `bias_sq / mse`, defined as 0 when `mse` is 0.
    pub bias_contribution: f64,
    pub mse_per_particle: f64,
    pub runs: usize,
}

/// Streaming accumulator for [`QualityStats`]; offspring vectors can be fed
/// one at a time without keeping them.
#[derive(Debug, Clone)]
pub struct QualityAccumulator {
    expected: Vec<f64>,
    sum: Vec<u64>,
    sum_sq: Vec<u64>,
    se_sum: f64,
    runs: usize,
}

impl QualityAccumulator {
    pub fn new(w: &WeightVector) -> Result<Self> {
        let expected = expected_offspring(w)?;
        let n = expected.len();
        Ok(Self { expected, sum: vec![0; n], sum_sq: vec![0; n], se_sum: 0.0, runs: 0 })
    }

    pub fn push(&mut self, o: &OffspringVector) -> Result<()> {
        if o.len() != self.expected.len() {
            return Err(Error::LengthMismatch { expected: self.expected.len(), actual: o.len() });
        }
        self.se_sum += squared_error_against(o, &self.expected);
        for ((s, ss), &c) in self.sum.iter_mut().zip(self.sum_sq.iter_mut()).zip(o.as_slice()) {
            let c = c as u64;
            *s += c;
            *ss += c * c;
        }
        self.runs += 1;
        Ok(())
    }

    pub fn runs(&self) -> usize {
        self.runs
    }

    pub fn finish(&self) -> Result<QualityStats> {
        let k = self.runs;
        if k < 2 {
            return invalid(format!("quality statistics need at least 2 runs, got {k}"));
        }
        let kf = k as f64;
        let mut scaled_var = 0u128;
        let mut bias_sq = 0.0;
        for ((&s, &ss), &e) in self.sum.iter().zip(&self.sum_sq).zip(&self.expected) {
            // K^2 * population variance, exact in integers.
            scaled_var += k as u128 * ss as u128 - s as u128 * s as u128;
            let d = s as f64 / kf - e;
            bias_sq += d * d;
        }
        let variance = scaled_var as f64 / (kf * kf);
        let mse = self.se_sum / kf;
        let bias_contribution = if mse > 0.0 { (bias_sq / mse).clamp(0.0, 1.0) } else { 0.0 };
        Ok(QualityStats {
            mse,
            variance,
            sample_variance: variance * kf / (kf - 1.0),
            bias_sq,
            bias_contribution,
            mse_per_particle: mse / self.expected.len() as f64,
            runs: k,
        })
    }
}

pub fn quality_stats(runs: &[OffspringVector], w: &WeightVector) -> Result<QualityStats> {
    let mut acc = QualityAccumulator::new(w)?;
    for o in runs {
        acc.push(o)?;
    }
    acc.finish()
}

/// Time spent in the three stages of one or more filter steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunTimings {
    /// Prediction and weight update.
    pub stage1: Duration,
    /// Resampling.
    pub stage2: Duration,
    /// Estimation.
    pub stage3: Duration,
}

impl RunTimings {
    pub fn total(&self) -> Duration {
        self.stage1 + self.stage2 + self.stage3
    }
}

impl Add for RunTimings {
    type Output = RunTimings;

    fn add(self, rhs: RunTimings) -> RunTimings {
        RunTimings {
            stage1: self.stage1 + rhs.stage1,
            stage2: self.stage2 + rhs.stage2,
            stage3: self.stage3 + rhs.stage3,
        }
    }
}

impl AddAssign for RunTimings {
    fn add_assign(&mut self, rhs: RunTimings) {
        *self = *self + rhs;
    }
}

/// Share of the total time spent resampling.
pub fn resample_ratio(t: &RunTimings) -> Result<f64> {
    let total = t.total().as_secs_f64();
    if total <= 0.0 {
        return invalid("resample ratio needs a non-zero total time");
    }
    Ok(t.stage2.as_secs_f64() / total)
}

/// Mean over time of the root-mean-square error across runs.
///
/// `estimates[k][t]` is run `k`'s estimate at step `t`.
pub fn rmse(truth: &[f64], estimates: &[Vec<f64>]) -> Result<f64> {
    if truth.is_empty() || estimates.is_empty() {
        return invalid("rmse needs at least one step and one run");
    }
    if let Some(bad) = estimates.iter().find(|e| e.len() != truth.len()) {
        return Err(Error::LengthMismatch { expected: truth.len(), actual: bad.len() });
    }
    let k = estimates.len() as f64;
    let per_step: f64 = truth
        .iter()
        .enumerate()
        .map(|(t, &x)| {
            let ms = estimates.iter().map(|e| (e[t] - x) * (e[t] - x)).sum::<f64>() / k;
            ms.sqrt()
        })
        .sum();
    Ok(per_step / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(v: &[u32]) -> OffspringVector {
        OffspringVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn squared_error_examples() {
        let flat = WeightVector::double(vec![1.0; 4]).unwrap();
        assert_eq!(squared_error(&ov(&[1, 1, 1, 1]), &flat).unwrap(), 0.0);
        let w = WeightVector::double(vec![1.0, 1.0]).unwrap();
        assert_eq!(squared_error(&ov(&[2, 0]), &w).unwrap(), 2.0);
        let w = WeightVector::double(vec![3.0, 1.0]).unwrap();
        assert_eq!(squared_error(&ov(&[2, 0]), &w).unwrap(), 0.5);
        let zero = WeightVector::double(vec![0.0, 0.0]).unwrap();
        assert!(squared_error(&ov(&[2, 0]), &zero).is_err());
        assert!(squared_error(&ov(&[1, 1, 1]), &w).is_err());
    }

    #[test]
    fn squared_error_is_scale_invariant() {
        let a = WeightVector::double(vec![0.3, 1.7, 2.0, 0.0]).unwrap();
        let b = WeightVector::double(a.values().iter().map(|v| v * 8.0).collect()).unwrap();
        let o = ov(&[0, 2, 2, 0]);
        assert_eq!(squared_error(&o, &a).unwrap(), squared_error(&o, &b).unwrap());
    }

    #[test]
    fn identical_runs_are_pure_bias() {
        let w = WeightVector::double(vec![3.0, 1.0]).unwrap();
        let runs = vec![ov(&[2, 0]); 5];
        let q = quality_stats(&runs, &w).unwrap();
        assert_eq!(q.variance, 0.0);
        assert_eq!(q.bias_contribution, 1.0);
        assert!((q.mse - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exact_runs_have_zero_error() {
        let w = WeightVector::double(vec![1.0; 3]).unwrap();
        let q = quality_stats(&vec![ov(&[1, 1, 1]); 4], &w).unwrap();
        assert_eq!(q.mse, 0.0);
        assert_eq!(q.bias_contribution, 0.0);
    }

    #[test]
    fn needs_two_runs() {
        let w = WeightVector::double(vec![1.0; 2]).unwrap();
        assert!(quality_stats(&[ov(&[1, 1])], &w).is_err());
    }

    #[test]
    fn decomposition_holds() {
        let w = WeightVector::double(vec![0.1, 0.5, 0.2, 0.2]).unwrap();
        let runs = vec![ov(&[0, 2, 1, 1]), ov(&[1, 3, 0, 0]), ov(&[0, 1, 2, 1]), ov(&[0, 4, 0, 0])];
        let q = quality_stats(&runs, &w).unwrap();
        assert!(((q.variance + q.bias_sq) / q.mse - 1.0).abs() < 1e-12);
        assert!((q.sample_variance - q.variance * 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(q.mse_per_particle, q.mse / 4.0);
    }

    #[test]
    fn rmse_examples() {
        let truth = vec![1.0, 2.0, 3.0];
        assert_eq!(rmse(&truth, &[truth.clone(), truth.clone()]).unwrap(), 0.0);
        let shifted: Vec<f64> = truth.iter().map(|x| x - 0.75).collect();
        assert!((rmse(&truth, &[shifted.clone(), shifted]).unwrap() - 0.75).abs() < 1e-12);
        let truth = vec![0.0, 0.0];
        let est = vec![vec![1.0, 3.0], vec![1.0, 5.0]];
        let expected = (1.0f64.sqrt() + 17.0f64.sqrt()) / 2.0;
        assert!((rmse(&truth, &est).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 2.5616).abs() < 1e-4);
        assert!(rmse(&truth, &[vec![1.0]]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn resample_ratio_examples() {
        let ms = Duration::from_millis;
        let t = |a, b, c| RunTimings { stage1: ms(a), stage2: ms(b), stage3: ms(c) };
        assert_eq!(resample_ratio(&t(2, 0, 2)).unwrap(), 0.0);
        assert!((resample_ratio(&t(5, 5, 5)).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((resample_ratio(&t(2, 6, 2)).unwrap() - 0.6).abs() < 1e-12);
        assert!(resample_ratio(&t(0, 0, 0)).is_err());
        assert_eq!(t(1, 2, 3) + t(1, 1, 1), t(2, 3, 4));
    }
}
