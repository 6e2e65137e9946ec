//! Prefix-sum resamplers: multinomial and systematic.

use rayon::prelude::*;

use super::{AncestorVector, WarpConfig};
use crate::error::{invalid, Result};
use crate::rng::{derive_seed, Lane, GLOBAL_LANE};
use crate::scan;
use crate::weights::{Precision, WeightVector};

const DOMAIN_MULTINOMIAL: u64 = 0x4d55_4c54_494e;
const DOMAIN_SYSTEMATIC: u64 = 0x5359_5354_454d;

/// Bucketed index into an exclusive prefix sum. `start[k]` is the answer
/// for the bucket's lower edge `edge[k]`, so a search for any `u` in bucket
/// `k` only has to look between `start[k]` and `start[k + 1]`.
struct GuideTable {
    edge: Vec<f64>,
    start: Vec<usize>,
    scale: f64,
}

impl GuideTable {
    fn new(excl: &[f64], total: f64) -> Self {
        let buckets = excl.len();
        let scale = buckets as f64 / total;
        let edge: Vec<f64> = (0..buckets).map(|k| k as f64 / scale).collect();
        let mut start = Vec::with_capacity(buckets + 1);
        let mut j = 0;
        for &e in &edge {
            while j + 1 < excl.len() && excl[j + 1] <= e {
                j += 1;
            }
            start.push(j);
        }
        start.push(excl.len() - 1);
        Self { edge, start, scale }
    }

    /// Largest `j` with `excl[j] <= u`, the same as a full binary search.
    fn find(&self, excl: &[f64], u: f64) -> usize {
        let last = self.edge.len() - 1;
        let mut k = ((u * self.scale) as usize).min(last);
        while k > 0 && self.edge[k] > u {
            k -= 1;
        }
        while k < last && self.edge[k + 1] <= u {
            k += 1;
        }
        let (lo, hi) = (self.start[k], self.start[k + 1]);
        lo + excl[lo..=hi].partition_point(|&e| e <= u) - 1
    }
}

/// Multinomial resampling: each particle draws `u` uniformly over the total
/// weight and searches the exclusive prefix sum for the bracket
/// `e[j] <= u < e[j + 1]`. Sums and `u` are formed in the weights' precision.
pub fn multinomial(w: &WeightVector, seed: u64) -> Result<AncestorVector> {
    w.require_positive_mass()?;
    let precision = w.precision();
    let values = w.values();
    let (excl, total) = scan::exclusive(values, precision);
    let guide = GuideTable::new(&excl, total);
    let seed = derive_seed(seed, DOMAIN_MULTINOMIAL);
    let ancestors = (0..values.len())
        .into_par_iter()
        .with_min_len(1024)
        .map(|i| {
            let r = Lane::new(seed, i as u64).uniform01(0);
            let u = match precision {
                Precision::Single => ((r as f32) * (total as f32)) as f64,
                Precision::Double => r * total,
            };
            let mut j = guide.find(&excl, u);
            // Rounding can push u onto the total, landing on trailing zero weights.
            while values[j] == 0.0 && j > 0 {
                j -= 1;
            }
            j
        })
        .collect();
    Ok(AncestorVector::from_raw(ancestors))
}

/// The shared systematic offset `u` for a seed.
pub fn systematic_u(seed: u64) -> f64 {
    Lane::new(derive_seed(seed, DOMAIN_SYSTEMATIC), GLOBAL_LANE).uniform01(0)
}

/// Stratum point `(i + u) / N` scaled to the prefix-sum total.
#[inline]
fn stratum(i: usize, u: f64, n: usize, total: f64, precision: Precision) -> f64 {
    match precision {
        Precision::Single => (((i as f32 + u as f32) / n as f32) * total as f32) as f64,
        Precision::Double => ((i as f64 + u) / n as f64) * total,
    }
}

fn check_u(u: f64) -> Result<()> {
    if !(0.0..1.0).contains(&u) {
        return invalid(format!("systematic offset must lie in [0, 1), got {u}"));
    }
    Ok(())
}

/// Steps back over zero weights, which a stratum point rounded up onto the
/// total can otherwise land on.
fn last_positive(values: &[f64], mut a: usize) -> usize {
    while values[a] == 0.0 && a > 0 {
        a -= 1;
    }
    a
}

/// Systematic resampling with an explicit offset, following the warp-level
/// search: every thread starts at its own index, walks forward while the
/// inclusive prefix sum has not passed its stratum point, then backward while
/// the preceding prefix value still exceeds it. The result is the particle
/// whose bracket `incl[a - 1] <= s < incl[a]` holds the stratum point `s`.
/// Lanes of a warp run in lockstep on a GPU, but no lane reads another's
/// state, so each walk is carried out on its own here.
pub fn systematic_with_u(w: &WeightVector, u: f64, warp: WarpConfig) -> Result<AncestorVector> {
    w.require_positive_mass()?;
    warp.validate()?;
    check_u(u)?;
    let precision = w.precision();
    let n = w.len();
    let values = w.values();
    let incl = scan::inclusive(values, precision);
    let total = incl[n - 1];

    let ancestors: Vec<usize> = (0..n)
        .into_par_iter()
        .with_min_len(warp.warp_size.max(1024))
        .map(|i| {
            let target = stratum(i, u, n, total, precision);
            let mut a = i;
            while a < n && incl[a] <= target {
                a += 1;
            }
            if a == i {
                while a > 0 && incl[a - 1] > target {
                    a -= 1;
                }
            }
            last_positive(values, a.min(n - 1))
        })
        .collect();
    Ok(AncestorVector::from_raw(ancestors))
}

/// Improved parallel systematic resampling with the offset drawn from `seed`.
pub fn systematic_improved(w: &WeightVector, seed: u64, warp: WarpConfig) -> Result<AncestorVector> {
    systematic_with_u(w, systematic_u(seed), warp)
}

/// Sequential single-pass systematic resampling.
pub fn systematic_oracle(w: &WeightVector, u: f64) -> Result<AncestorVector> {
    w.require_positive_mass()?;
    check_u(u)?;
    let precision = w.precision();
    let n = w.len();
    let incl = scan::inclusive(w.values(), precision);
    let total = incl[n - 1];
    let mut j = 0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let s = stratum(i, u, n, total, precision);
        while j < n - 1 && incl[j] <= s {
            j += 1;
        }
        out.push(last_positive(w.values(), j));
    }
    Ok(AncestorVector::from_raw(out))
}
