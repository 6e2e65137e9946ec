//! Resampling algorithms over a logical warp execution model.
//!
//! All resamplers are pure functions of `(weights, configuration, seed)` and
//! return one ancestor index per particle. Warps are never materialised:
//! particle `i` belongs to warp `i / warp_size`, and every per-warp draw is
//! taken from a stream whose lane is the warp index, so the result does not
//! depend on how particles are scheduled across host threads.
//!
//! Random draw layout (counters within a lane):
//!
//! | algorithm   | per particle `i`                  | shared                                |
//! |-------------|-----------------------------------|---------------------------------------|
//! | Metropolis  | `u` at `2b`, `j` at `2b + 1`      | none                                  |
//! | C1          | as Metropolis (`j` within `p`)    | warp lane, counter 0: partition `p`   |
//! | C2          | as Metropolis (`j` within `p_b`)  | warp lane, counter `b`: partition     |
//! | Megopolis   | `u` at `b`                        | global lane, counter `b`: offset      |
//! | Multinomial | `u` at 0                          | none                                  |
//! | Systematic  | none                              | global lane, counter 0: `u`           |
//!
//! Metropolis, C1 and C2 share their per-particle streams, so C1 or C2 with
//! a single partition reproduces Metropolis bit for bit.

mod metropolis;
mod prefix;

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::weights::WeightVector;

pub use metropolis::{
    megopolis, megopolis_index, megopolis_offsets, metropolis, metropolis_c1, metropolis_c2,
    replay_warp,
};
pub use prefix::{multinomial, systematic_improved, systematic_oracle, systematic_u, systematic_with_u};

/// How warp-based algorithms treat a particle count that is not a multiple
/// of the warp size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlignmentMode {
    /// Reject such inputs.
    #[default]
    Strict,
    /// Accept them; indices wrap modulo `N`, so the tail warp's accesses are
    /// no longer confined to one aligned block.
    Wrap,
}

/// Geometry of the emulated memory system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WarpConfig {
    pub warp_size: usize,
    pub word_bytes: usize,
    pub segment_bytes: usize,
    pub alignment: AlignmentMode,
}

impl Default for WarpConfig {
    fn default() -> Self {
        Self {
            warp_size: 32,
            word_bytes: 4,
            segment_bytes: 32,
            alignment: AlignmentMode::Strict,
        }
    }
}

impl WarpConfig {
    pub fn new(warp_size: usize, word_bytes: usize, segment_bytes: usize) -> Result<Self> {
        let cfg = Self {
            warp_size,
            word_bytes,
            segment_bytes,
            alignment: AlignmentMode::Strict,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_alignment(self, alignment: AlignmentMode) -> Self {
        Self { alignment, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.warp_size == 0 || self.word_bytes == 0 || self.segment_bytes == 0 {
            return invalid("warp size, word size and segment size must be positive");
        }
        if self.segment_bytes % self.word_bytes != 0 {
            return invalid(format!(
                "segment of {} bytes is not a whole number of {}-byte words",
                self.segment_bytes, self.word_bytes
            ));
        }
        Ok(())
    }

    pub fn words_per_segment(&self) -> usize {
        self.segment_bytes / self.word_bytes
    }

    pub fn warp_count(&self, n: usize) -> usize {
        n.div_ceil(self.warp_size)
    }

    pub(crate) fn check_particles(&self, n: usize) -> Result<()> {
        self.validate()?;
        if self.alignment == AlignmentMode::Strict && n % self.warp_size != 0 {
            return invalid(format!(
                "{n} particles is not a multiple of the warp size {}",
                self.warp_size
            ));
        }
        Ok(())
    }
}

/// Partition size in bytes for the C1 and C2 variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PartitionConfig {
    pub partition_bytes: usize,
}

/// Partition count and width for a concrete particle count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionLayout {
    /// Number of partitions covering the weight array.
    pub count: usize,
    /// Weights per partition.
    pub words: usize,
}

impl PartitionConfig {
    pub fn new(partition_bytes: usize) -> Self {
        Self { partition_bytes }
    }

    pub fn layout(&self, n: usize, word_bytes: usize) -> Result<PartitionLayout> {
        let p = self.partition_bytes;
        if p == 0 || word_bytes == 0 || p % word_bytes != 0 {
            return invalid(format!("partition of {p} bytes is not a whole number of {word_bytes}-byte words"));
        }
        let total = n * word_bytes;
        if total % p != 0 || total < p {
            return invalid(format!("{n} weights of {word_bytes} bytes do not split into {p}-byte partitions"));
        }
        Ok(PartitionLayout { count: total / p, words: p / word_bytes })
    }
}

/// Resampler identity, including C1/C2 partition sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Metropolis,
    MetropolisC1(PartitionConfig),
    MetropolisC2(PartitionConfig),
    Megopolis,
    Multinomial,
    Systematic,
}

impl Algorithm {
    /// Whether the algorithm needs an iteration budget.
    pub fn is_iterative(&self) -> bool {
        !matches!(self, Algorithm::Multinomial | Algorithm::Systematic)
    }

    pub fn partition(&self) -> Option<PartitionConfig> {
        match self {
            Algorithm::MetropolisC1(p) | Algorithm::MetropolisC2(p) => Some(*p),
            _ => None,
        }
    }

    /// Random numbers each particle generates per iteration, counting shared
    /// draws once per thread as a GPU kernel would.
    pub fn draws_per_iteration(&self) -> f64 {
        match self {
            Algorithm::Metropolis | Algorithm::MetropolisC1(_) => 2.0,
            Algorithm::MetropolisC2(_) => 3.0,
            Algorithm::Megopolis => 1.0,
            Algorithm::Multinomial | Algorithm::Systematic => 0.0,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Metropolis => f.write_str("metropolis"),
            Algorithm::MetropolisC1(p) => write!(f, "c1-ps{}", p.partition_bytes),
            Algorithm::MetropolisC2(p) => write!(f, "c2-ps{}", p.partition_bytes),
            Algorithm::Megopolis => f.write_str("megopolis"),
            Algorithm::Multinomial => f.write_str("multinomial"),
            Algorithm::Systematic => f.write_str("systematic"),
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let partitioned = |rest: &str| -> Result<PartitionConfig> {
            rest.parse::<usize>()
                .map(PartitionConfig::new)
                .map_err(|_| Error::InvalidArgument(format!("bad partition size in {s:?}")))
        };
        match lower.as_str() {
            "metropolis" => Ok(Algorithm::Metropolis),
            "megopolis" => Ok(Algorithm::Megopolis),
            "multinomial" => Ok(Algorithm::Multinomial),
            "systematic" => Ok(Algorithm::Systematic),
            _ => {
                if let Some(rest) = lower.strip_prefix("c1-ps") {
                    Ok(Algorithm::MetropolisC1(partitioned(rest)?))
                } else if let Some(rest) = lower.strip_prefix("c2-ps") {
                    Ok(Algorithm::MetropolisC2(partitioned(rest)?))
                } else {
                    invalid(format!("unknown algorithm {s:?}"))
                }
            }
        }
    }
}

/// A fully configured resampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resampler {
    pub algorithm: Algorithm,
    /// Iteration budget `B`; ignored by the prefix-sum algorithms.
    pub iterations: usize,
    pub warp: WarpConfig,
}

impl Resampler {
    pub fn new(algorithm: Algorithm, iterations: usize) -> Self {
        Self { algorithm, iterations, warp: WarpConfig::default() }
    }

    pub fn with_warp(self, warp: WarpConfig) -> Self {
        Self { warp, ..self }
    }

    pub fn resample(&self, w: &WeightVector, seed: u64) -> Result<AncestorVector> {
        let b = self.iterations;
        match self.algorithm {
            Algorithm::Metropolis => metropolis(w, b, seed),
            Algorithm::MetropolisC1(p) => metropolis_c1(w, b, p, self.warp, seed),
            Algorithm::MetropolisC2(p) => metropolis_c2(w, b, p, self.warp, seed),
            Algorithm::Megopolis => megopolis(w, b, self.warp, seed),
            Algorithm::Multinomial => multinomial(w, seed),
            Algorithm::Systematic => systematic_improved(w, seed, self.warp),
        }
    }
}

/// Ancestor index of every particle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AncestorVector(Vec<usize>);

impl AncestorVector {
    pub fn new(ancestors: Vec<usize>) -> Result<Self> {
        let n = ancestors.len();
        if let Some(bad) = ancestors.iter().find(|&&a| a >= n) {
            return invalid(format!("ancestor {bad} out of range for {n} particles"));
        }
        Ok(Self(ancestors))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub(crate) fn from_raw(ancestors: Vec<usize>) -> Self {
        debug_assert!(ancestors.iter().all(|&a| a < ancestors.len()));
        Self(ancestors)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `(self ∘ after)[i] = self[after[i]]`: applying `self` and then `after`
    /// equals applying the composition once.
    pub fn compose(&self, after: &AncestorVector) -> Result<AncestorVector> {
        if self.len() != after.len() {
            return Err(Error::LengthMismatch { expected: self.len(), actual: after.len() });
        }
        Ok(Self(after.0.iter().map(|&i| self.0[i]).collect()))
    }
}

/// Number of copies of every particle; sums to `N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffspringVector(Vec<u32>);

impl OffspringVector {
    pub fn new(counts: Vec<u32>) -> Result<Self> {
        let sum: u64 = counts.iter().map(|&c| c as u64).sum();
        if sum != counts.len() as u64 {
            return invalid(format!("offspring sum {sum} differs from particle count {}", counts.len()));
        }
        Ok(Self(counts))
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }
}

/// Megopolis's shared comparison offsets, one per iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffsetList(Vec<usize>);

impl OffsetList {
    pub fn new(offsets: Vec<usize>, n: usize) -> Result<Self> {
        if let Some(bad) = offsets.iter().find(|&&o| o >= n) {
            return invalid(format!("offset {bad} out of range for {n} particles"));
        }
        Ok(Self(offsets))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn ancestors_to_offspring(a: &AncestorVector) -> OffspringVector {
    let mut counts = vec![0u32; a.len()];
    for &k in a.as_slice() {
        counts[k] += 1;
    }
    OffspringVector(counts)
}

/// `out[i] = states[a[i]]`.
pub fn apply_ancestors<T: Clone>(states: &[T], a: &AncestorVector) -> Result<Vec<T>> {
    if states.len() != a.len() {
        return Err(Error::LengthMismatch { expected: a.len(), actual: states.len() });
    }
    Ok(a.as_slice().iter().map(|&k| states[k].clone()).collect())
}

#[inline(always)]
pub(crate) fn accepts(u: f64, wj: f64, wk: f64) -> bool {
    if wk > 0.0 {
        u <= wj / wk
    } else {
        // Zero current weight: any positive candidate wins, zero never does.
        wj > 0.0
    }
}

pub(crate) fn check_iterative(w: &WeightVector, iterations: usize) -> Result<()> {
    if iterations == 0 {
        return invalid("iteration budget must be >= 1");
    }
    w.require_positive_mass()
}
