//! Sequential prefix sums in a chosen precision.
//!
//! Accumulation runs strictly left to right so results are reproducible.
//! In single precision the running sum is held in `f32`, which is what makes
//! the rounding error of prefix-sum resamplers grow with the particle count.

use crate::weights::Precision;

/// `out[i] = w[0] + ... + w[i]`.
pub fn inclusive(values: &[f64], precision: Precision) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    match precision {
        Precision::Single => {
            let mut acc = 0.0f32;
            for &v in values {
                acc += v as f32;
                out.push(acc as f64);
            }
        }
        Precision::Double => {
            let mut acc = 0.0f64;
            for &v in values {
                acc += v;
                out.push(acc);
            }
        }
    }
    out
}

/// `out[i] = w[0] + ... + w[i-1]`, plus the grand total.
pub fn exclusive(values: &[f64], precision: Precision) -> (Vec<f64>, f64) {
    let mut out = Vec::with_capacity(values.len());
    let total = match precision {
        Precision::Single => {
            let mut acc = 0.0f32;
            for &v in values {
                out.push(acc as f64);
                acc += v as f32;
            }
            acc as f64
        }
        Precision::Double => {
            let mut acc = 0.0f64;
            for &v in values {
                out.push(acc);
                acc += v;
            }
            acc
        }
    };
    (out, total)
}

/// Pairwise (tree) sum in double precision with a fixed split order.
pub fn tree_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    tree_sum(&values[..mid]) + tree_sum(&values[mid..])
}
