//! Metropolis, its partitioned C1/C2 variants, and Megopolis.
//!
//! The four algorithms share one accept/reject chain and differ only in how
//! the comparison index `j` is proposed at each iteration.

use rayon::prelude::*;

use super::{accepts, check_iterative, AncestorVector, OffsetList, PartitionConfig, PartitionLayout, WarpConfig};
use crate::error::{invalid, Result};
use crate::rng::{derive_seed, Lane, GLOBAL_LANE};
use crate::weights::WeightVector;

const DOMAIN_PARTICLE: u64 = 0x4d45_5452_4f50;
const DOMAIN_WARP: u64 = 0x4d45_5457_4152;
const DOMAIN_MEGO_PARTICLE: u64 = 0x4d45_474f_5054;
const DOMAIN_MEGO_OFFSET: u64 = 0x4d45_474f_4f46;

const MIN_PARALLEL_CHUNK: usize = 1024;

pub(crate) trait Proposal: Sync {
    type Local;

    fn local(&self, i: usize) -> Self::Local;

    /// Comparison index and acceptance uniform for iteration `b`.
    fn propose(&self, local: &Self::Local, i: usize, b: usize) -> (usize, f64);
}

#[inline(always)]
fn chain<P: Proposal>(
    w: &[f64],
    iterations: usize,
    proposal: &P,
    i: usize,
    mut visit: impl FnMut(usize, usize),
) -> usize {
    let local = proposal.local(i);
    let mut k = i;
    let mut wk = w[i];
    for b in 0..iterations {
        let (j, u) = proposal.propose(&local, i, b);
        visit(b, j);
        let wj = w[j];
        if accepts(u, wj, wk) {
            k = j;
            wk = wj;
        }
    }
    k
}

/// Number of independent chains [`run`] advances side by side.
const BLOCK: usize = 8;

#[inline(always)]
fn chain_block<P: Proposal>(w: &[f64], iterations: usize, proposal: &P, first: usize, out: &mut [usize]) {
    let lanes = out.len();
    if lanes != BLOCK {
        for (l, a) in out.iter_mut().enumerate() {
            *a = chain(w, iterations, proposal, first + l, |_, _| {});
        }
        return;
    }
    let locals: [P::Local; BLOCK] = std::array::from_fn(|l| proposal.local(first + l));
    let mut k: [usize; BLOCK] = std::array::from_fn(|l| first + l);
    let mut wk: [f64; BLOCK] = std::array::from_fn(|l| w[first + l]);
    for b in 0..iterations {
        for l in 0..BLOCK {
            let (j, u) = proposal.propose(&locals[l], first + l, b);
            let wj = w[j];
            let take = accepts(u, wj, wk[l]);
            k[l] = if take { j } else { k[l] };
            wk[l] = if take { wj } else { wk[l] };
        }
    }
    out.copy_from_slice(&k);
}

fn run<P: Proposal>(w: &WeightVector, iterations: usize, proposal: &P) -> AncestorVector {
    let values = w.values();
    let mut ancestors = vec![0; values.len()];
    ancestors
        .par_chunks_mut(BLOCK)
        .with_min_len(MIN_PARALLEL_CHUNK / BLOCK)
        .enumerate()
        .for_each(|(c, out)| chain_block(values, iterations, proposal, c * BLOCK, out));
    AncestorVector::from_raw(ancestors)
}

struct Uniform {
    particles: u64,
    n: u64,
}

impl Uniform {
    fn new(seed: u64, n: usize) -> Self {
        Self { particles: derive_seed(seed, DOMAIN_PARTICLE), n: n as u64 }
    }
}

impl Proposal for Uniform {
    type Local = Lane;

    fn local(&self, i: usize) -> Lane {
        Lane::new(self.particles, i as u64)
    }

    #[inline(always)]
    fn propose(&self, lane: &Lane, _i: usize, b: usize) -> (usize, f64) {
        let c = 2 * b as u64;
        let u = lane.uniform01(c);
        let j = lane.below(c + 1, self.n) as usize;
        (j, u)
    }
}

struct Partitioned {
    particles: u64,
    warps: u64,
    warp_size: usize,
    layout: PartitionLayout,
    fresh_each_iteration: bool,
}

impl Partitioned {
    fn new(seed: u64, layout: PartitionLayout, warp_size: usize, fresh_each_iteration: bool) -> Self {
        Self {
            particles: derive_seed(seed, DOMAIN_PARTICLE),
            warps: derive_seed(seed, DOMAIN_WARP),
            warp_size,
            layout,
            fresh_each_iteration,
        }
    }
}

struct PartitionedLocal {
    particle: Lane,
    warp: Lane,
    fixed: usize,
}

impl Proposal for Partitioned {
    type Local = PartitionedLocal;

    fn local(&self, i: usize) -> PartitionedLocal {
        let warp = Lane::new(self.warps, (i / self.warp_size) as u64);
        let fixed = if self.fresh_each_iteration {
            0
        } else {
            warp.below(0, self.layout.count as u64) as usize
        };
        PartitionedLocal { particle: Lane::new(self.particles, i as u64), warp, fixed }
    }

    #[inline(always)]
    fn propose(&self, local: &PartitionedLocal, _i: usize, b: usize) -> (usize, f64) {
        let c = 2 * b as u64;
        let u = local.particle.uniform01(c);
        let p = if self.fresh_each_iteration {
            local.warp.below(b as u64, self.layout.count as u64) as usize
        } else {
            local.fixed
        };
        let j = p * self.layout.words + local.particle.below(c + 1, self.layout.words as u64) as usize;
        (j, u)
    }
}

struct Wrapped {
    particles: u64,
    /// Aligned part and lane rotation of every iteration's shared offset.
    offsets: Vec<(usize, usize)>,
    warp_size: usize,
    n: usize,
}

impl Wrapped {
    fn new(seed: u64, offsets: &OffsetList, warp_size: usize, n: usize) -> Self {
        let offsets = offsets.as_slice().iter().map(|&o| (o - o % warp_size, o % warp_size)).collect();
        Self { particles: derive_seed(seed, DOMAIN_MEGO_PARTICLE), offsets, warp_size, n }
    }
}

struct WrappedLocal {
    lane: Lane,
    aligned: usize,
    rotation: usize,
}

impl Proposal for Wrapped {
    type Local = WrappedLocal;

    fn local(&self, i: usize) -> WrappedLocal {
        let rotation = i % self.warp_size;
        WrappedLocal { lane: Lane::new(self.particles, i as u64), aligned: i - rotation, rotation }
    }

    /// Same index as [`wrapped_index`] with the divisions hoisted out of the
    /// loop. The lane sum stays below `2W`; the block sum only exceeds `2N`
    /// in wrap mode with fewer particles than a warp.
    #[inline(always)]
    fn propose(&self, local: &WrappedLocal, _i: usize, b: usize) -> (usize, f64) {
        let (o_aligned, o_rotation) = self.offsets[b];
        let mut lane = local.rotation + o_rotation;
        if lane >= self.warp_size {
            lane -= self.warp_size;
        }
        let mut j = local.aligned + o_aligned + lane;
        if j >= self.n {
            j -= self.n;
            if j >= self.n {
                j %= self.n;
            }
        }
        (j, local.lane.uniform01(b as u64))
    }
}

#[inline(always)]
fn wrapped_index(i: usize, offset: usize, warp_size: usize, n: usize) -> usize {
    let i_aligned = i - i % warp_size;
    let o_aligned = offset - offset % warp_size;
    let o_unaligned = (i + offset) % warp_size;
    (i_aligned + o_aligned + o_unaligned) % n
}

/// Comparison index of particle `i` for the shared offset `offset`: the
/// aligned block of `i`'s warp shifted by the aligned part of the offset,
/// with the lane rotated by the unaligned part.
pub fn megopolis_index(i: usize, offset: usize, warp: WarpConfig, n: usize) -> Result<usize> {
    warp.validate()?;
    if i >= n || offset >= n {
        return invalid(format!("index {i} and offset {offset} must be below {n}"));
    }
    Ok(wrapped_index(i, offset, warp.warp_size, n))
}

/// Draws the `iterations` shared offsets uniformly from `[0, n)`.
pub fn megopolis_offsets(n: usize, iterations: usize, seed: u64) -> OffsetList {
    let lane = Lane::new(derive_seed(seed, DOMAIN_MEGO_OFFSET), GLOBAL_LANE);
    let offsets = (0..iterations as u64).map(|b| lane.below(b, n as u64) as usize).collect();
    OffsetList(offsets)
}

/// Classic Metropolis resampling: every particle proposes uniformly random
/// comparison indices.
pub fn metropolis(w: &WeightVector, iterations: usize, seed: u64) -> Result<AncestorVector> {
    check_iterative(w, iterations)?;
    Ok(run(w, iterations, &Uniform::new(seed, w.len())))
}

fn partitioned(
    w: &WeightVector,
    iterations: usize,
    part: PartitionConfig,
    warp: WarpConfig,
    seed: u64,
    fresh_each_iteration: bool,
) -> Result<AncestorVector> {
    check_iterative(w, iterations)?;
    warp.check_particles(w.len())?;
    let layout = part.layout(w.len(), warp.word_bytes)?;
    Ok(run(w, iterations, &Partitioned::new(seed, layout, warp.warp_size, fresh_each_iteration)))
}

/// Metropolis-C1: each warp draws one partition and proposes only inside it.
pub fn metropolis_c1(
    w: &WeightVector,
    iterations: usize,
    part: PartitionConfig,
    warp: WarpConfig,
    seed: u64,
) -> Result<AncestorVector> {
    partitioned(w, iterations, part, warp, seed, false)
}

/// Metropolis-C2: as C1, but the warp redraws its partition every iteration.
pub fn metropolis_c2(
    w: &WeightVector,
    iterations: usize,
    part: PartitionConfig,
    warp: WarpConfig,
    seed: u64,
) -> Result<AncestorVector> {
    partitioned(w, iterations, part, warp, seed, true)
}

/// Megopolis: all particles share one random offset per iteration and read
/// their comparison weights from a single aligned, wrapped block per warp.
pub fn megopolis(w: &WeightVector, iterations: usize, warp: WarpConfig, seed: u64) -> Result<AncestorVector> {
    check_iterative(w, iterations)?;
    warp.check_particles(w.len())?;
    let offsets = megopolis_offsets(w.len(), iterations, seed);
    Ok(run(w, iterations, &Wrapped::new(seed, &offsets, warp.warp_size, w.len())))
}

/// Re-runs the comparison chains of one warp exactly as the resampler does,
/// calling `visit(lane, iteration, j)` for every weight read.
///
/// Returns the ancestors chosen by the warp's particles.
pub fn replay_warp(
    algorithm: super::Algorithm,
    w: &WeightVector,
    iterations: usize,
    warp: WarpConfig,
    seed: u64,
    warp_index: usize,
    mut visit: impl FnMut(usize, usize, usize),
) -> Result<Vec<usize>> {
    use super::Algorithm;

    check_iterative(w, iterations)?;
    let n = w.len();
    let start = warp_index * warp.warp_size;
    if start >= n {
        return invalid(format!("warp {warp_index} lies beyond {n} particles"));
    }
    let lanes = start..(start + warp.warp_size).min(n);
    let values = w.values();

    fn replay<P: Proposal>(
        values: &[f64],
        iterations: usize,
        p: &P,
        lanes: std::ops::Range<usize>,
        visit: &mut impl FnMut(usize, usize, usize),
    ) -> Vec<usize> {
        let start = lanes.start;
        lanes
            .map(|i| chain(values, iterations, p, i, |b, j| visit(i - start, b, j)))
            .collect()
    }

    let out = match algorithm {
        Algorithm::Metropolis => replay(values, iterations, &Uniform::new(seed, n), lanes, &mut visit),
        Algorithm::MetropolisC1(part) | Algorithm::MetropolisC2(part) => {
            warp.check_particles(n)?;
            let layout = part.layout(n, warp.word_bytes)?;
            let fresh = matches!(algorithm, Algorithm::MetropolisC2(_));
            let p = Partitioned::new(seed, layout, warp.warp_size, fresh);
            replay(values, iterations, &p, lanes, &mut visit)
        }
        Algorithm::Megopolis => {
            warp.check_particles(n)?;
            let offsets = megopolis_offsets(n, iterations, seed);
            let p = Wrapped::new(seed, &offsets, warp.warp_size, n);
            replay(values, iterations, &p, lanes, &mut visit)
        }
        Algorithm::Multinomial | Algorithm::Systematic => {
            return invalid(format!("{algorithm} does not perform weight comparisons"));
        }
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{ancestors_to_offspring, AlignmentMode, Algorithm};
    use super::*;
    use crate::weights::{gen_gaussian_weights, GaussianWeightParams, Precision};

    fn flat(n: usize) -> WeightVector {
        WeightVector::double(vec![1.0; n]).unwrap()
    }

    #[test]
    fn hoisted_index_matches_definition() {
        for (n, ws) in [(128, 32), (96, 32), (100, 32), (5, 32), (7, 4)] {
            let offsets = OffsetList((0..n).collect());
            let p = Wrapped::new(1, &offsets, ws, n);
            for i in 0..n {
                let local = p.local(i);
                for b in 0..n {
                    assert_eq!(p.propose(&local, i, b).0, wrapped_index(i, b, ws, n), "n={n} W={ws} i={i} o={b}");
                }
            }
        }
    }

    #[test]
    fn megopolis_index_examples() {
        let warp = WarpConfig::default();
        assert_eq!(megopolis_index(5, 0, warp, 128).unwrap(), 5);
        assert_eq!(megopolis_index(5, 70, warp, 128).unwrap(), 75);
        assert!(megopolis_index(128, 0, warp, 128).is_err());
        for offset in [0, 1, 31, 32, 33, 97, 127] {
            for base in [0, 32, 64, 96] {
                let mut js: Vec<usize> = (base..base + 32)
                    .map(|i| megopolis_index(i, offset, warp, 128).unwrap())
                    .collect();
                let block = js[0] / 32;
                assert!(js.iter().all(|j| j / 32 == block));
                js.sort_unstable();
                js.dedup();
                assert_eq!(js.len(), 32);
            }
        }
    }

    #[test]
    fn single_particle() {
        let w = flat(1);
        assert_eq!(metropolis(&w, 5, 1).unwrap().as_slice(), &[0]);
        let wrap = WarpConfig::default().with_alignment(AlignmentMode::Wrap);
        assert_eq!(megopolis(&w, 5, wrap, 1).unwrap().as_slice(), &[0]);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let zeros = WeightVector::double(vec![0.0; 64]).unwrap();
        assert!(metropolis(&zeros, 4, 0).is_err());
        assert!(megopolis(&zeros, 4, WarpConfig::default(), 0).is_err());
        assert!(metropolis(&flat(64), 0, 0).is_err());
        assert!(megopolis(&flat(48), 4, WarpConfig::default(), 0).is_err());
        let p = PartitionConfig::new(100);
        assert!(metropolis_c1(&flat(64), 4, p, WarpConfig::default(), 0).is_err());
        assert!(metropolis_c2(&flat(64), 4, p, WarpConfig::default(), 0).is_err());
    }

    #[test]
    fn zero_then_one_converges() {
        let w = WeightVector::double(vec![0.0, 1.0]).unwrap();
        let a = metropolis(&w, 64, 3).unwrap();
        assert_eq!(a.as_slice(), &[1, 1]);
    }

    #[test]
    fn megopolis_uniform_is_permutation() {
        for seed in 0..20 {
            let a = megopolis(&flat(256), 1 + seed as usize % 7, WarpConfig::default(), seed).unwrap();
            assert!(ancestors_to_offspring(&a).as_slice().iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn self_retention_can_exceed_budget_by_one() {
        // Particle 31 proposes the heavy particle 0 under offset 1 and always
        // accepts; particle 0 keeps itself unless u <= 0.1. Offspring B + 1
        // is therefore reachable, and B + 1 is the hard bound.
        let mut v = vec![1.0; 64];
        v[0] = 10.0;
        let w = WeightVector::double(v).unwrap();
        let warp = WarpConfig::default();
        let mut seen_two = false;
        for seed in 0..2000 {
            let offsets = megopolis_offsets(64, 1, seed);
            let o = ancestors_to_offspring(&megopolis(&w, 1, warp, seed).unwrap());
            assert!(o.max() <= 2);
            if offsets.as_slice()[0] == 1 && o.as_slice()[0] == 2 {
                seen_two = true;
            }
        }
        assert!(seen_two);
    }

    #[test]
    fn c1_one_partition_is_metropolis() {
        let w = gen_gaussian_weights(GaussianWeightParams { y: 2.0, n: 256 }, Precision::Double, 1).unwrap();
        let whole = PartitionConfig::new(256 * 4);
        let m = metropolis(&w, 12, 9).unwrap();
        assert_eq!(metropolis_c1(&w, 12, whole, WarpConfig::default(), 9).unwrap(), m);
        assert_eq!(metropolis_c2(&w, 12, whole, WarpConfig::default(), 9).unwrap(), m);
    }

    #[test]
    fn c1_reads_stay_in_one_partition() {
        let w = flat(64);
        let alg = Algorithm::MetropolisC1(PartitionConfig::new(128));
        for seed in 0..10 {
            for warp_index in 0..2 {
                let mut js = Vec::new();
                replay_warp(alg, &w, 8, WarpConfig::default(), seed, warp_index, |_, _, j| js.push(j)).unwrap();
                let block = js[0] / 32;
                assert!(js.iter().all(|&j| j / 32 == block));
            }
        }
    }

    #[test]
    fn c2_redraws_partitions() {
        let w = flat(4096);
        let alg = Algorithm::MetropolisC2(PartitionConfig::new(128));
        let mut blocks = std::collections::BTreeSet::new();
        replay_warp(alg, &w, 16, WarpConfig::default(), 5, 0, |_, b, j| {
            if blocks.len() < 100 {
                blocks.insert((b, j / 32));
            }
        })
        .unwrap();
        let distinct: std::collections::BTreeSet<usize> = blocks.iter().map(|&(_, p)| p).collect();
        assert!(distinct.len() > 1);
        // One partition per iteration.
        assert_eq!(blocks.len(), 16);
    }

    #[test]
    fn replay_matches_resampler() {
        let w = gen_gaussian_weights(GaussianWeightParams { y: 3.0, n: 512 }, Precision::Single, 4).unwrap();
        let warp = WarpConfig::default();
        for alg in [
            Algorithm::Metropolis,
            Algorithm::MetropolisC1(PartitionConfig::new(128)),
            Algorithm::MetropolisC2(PartitionConfig::new(256)),
            Algorithm::Megopolis,
        ] {
            let full = super::super::Resampler::new(alg, 20).resample(&w, 77).unwrap();
            let mut replayed = Vec::new();
            for wi in 0..warp.warp_count(512) {
                replayed.extend(replay_warp(alg, &w, 20, warp, 77, wi, |_, _, _| {}).unwrap());
            }
            assert_eq!(replayed, full.into_inner(), "{alg}");
        }
        assert!(replay_warp(Algorithm::Systematic, &w, 1, warp, 0, 0, |_, _, _| {}).is_err());
    }

    #[test]
    fn megopolis_wrap_mode_handles_ragged_tail() {
        let w = gen_gaussian_weights(GaussianWeightParams { y: 1.0, n: 100 }, Precision::Double, 4).unwrap();
        let wrap = WarpConfig::default().with_alignment(AlignmentMode::Wrap);
        let a = megopolis(&w, 8, wrap, 2).unwrap();
        assert_eq!(a.len(), 100);
        let o = ancestors_to_offspring(&a);
        assert_eq!(o.as_slice().iter().map(|&c| c as usize).sum::<usize>(), 100);
    }
}
