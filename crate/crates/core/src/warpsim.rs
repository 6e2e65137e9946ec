//! Analytical model of warp memory traffic.
//!
//! A warp's loads are served by whole aligned segments; the cost of one
//! warp-wide read is the number of distinct segments touched. Only the weight
//! reads of the comparison step are modelled, per (warp, iteration), with no
//! cache and no reuse between iterations.

use crate::error::{invalid, Result};
use crate::resample::{replay_warp, Algorithm, WarpConfig};
use crate::weights::WeightVector;

/// Number of distinct aligned segments covering the given word indices.
pub fn count_transactions(word_indices: &[usize], warp: &WarpConfig) -> usize {
    let mut segments: Vec<usize> = word_indices
        .iter()
        .map(|&idx| idx * warp.word_bytes / warp.segment_bytes)
        .collect();
    segments.sort_unstable();
    segments.dedup();
    segments.len()
}

fn distinct_words(word_indices: &[usize]) -> usize {
    let mut words = word_indices.to_vec();
    words.sort_unstable();
    words.dedup();
    words.len()
}

/// Word indices read by every lane, grouped as `reads[warp][iteration][lane]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessTrace {
    pub n: usize,
    pub iterations: usize,
    pub reads: Vec<Vec<Vec<usize>>>,
}

/// Aggregated traffic over every (warp, iteration) access.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrafficReport {
    pub total_transactions: u64,
    /// Mean transactions per warp-wide read.
    pub per_iteration_mean: f64,
    /// Largest transaction count of any single warp-wide read.
    pub per_warp_max: usize,
    /// Words delivered by fetched segments but not requested by any lane.
    pub unnecessary_words: u64,
    /// Number of warp-wide reads aggregated.
    pub accesses: u64,
}

/// Streaming form of [`traffic_report`].
#[derive(Debug, Clone)]
pub struct TrafficAccumulator {
    warp: WarpConfig,
    report: TrafficReport,
}

impl TrafficAccumulator {
    pub fn new(warp: WarpConfig) -> Self {
        Self { warp, report: TrafficReport::default() }
    }

    pub fn push(&mut self, word_indices: &[usize]) {
        let segments = count_transactions(word_indices, &self.warp);
        let fetched = segments * self.warp.words_per_segment();
        let r = &mut self.report;
        r.total_transactions += segments as u64;
        r.per_warp_max = r.per_warp_max.max(segments);
        r.unnecessary_words += (fetched - distinct_words(word_indices)) as u64;
        r.accesses += 1;
    }

    pub fn finish(&self) -> TrafficReport {
        let mut r = self.report;
        r.per_iteration_mean = if r.accesses == 0 {
            0.0
        } else {
            r.total_transactions as f64 / r.accesses as f64
        };
        r
    }
}

pub fn traffic_report(trace: &AccessTrace, warp: &WarpConfig) -> TrafficReport {
    let mut acc = TrafficAccumulator::new(*warp);
    for per_warp in &trace.reads {
        for reads in per_warp {
            acc.push(reads);
        }
    }
    acc.finish()
}

fn warp_reads(
    algorithm: Algorithm,
    w: &WeightVector,
    iterations: usize,
    warp: WarpConfig,
    seed: u64,
    warp_index: usize,
) -> Result<Vec<Vec<usize>>> {
    let mut reads = vec![Vec::with_capacity(warp.warp_size); iterations];
    replay_warp(algorithm, w, iterations, warp, seed, warp_index, |_, b, j| reads[b].push(j))?;
    Ok(reads)
}

/// Records every comparison read the resampler makes under `seed`.
pub fn trace_algorithm(
    algorithm: Algorithm,
    w: &WeightVector,
    iterations: usize,
    warp: WarpConfig,
    seed: u64,
) -> Result<AccessTrace> {
    let reads = (0..warp.warp_count(w.len()))
        .map(|wi| warp_reads(algorithm, w, iterations, warp, seed, wi))
        .collect::<Result<_>>()?;
    Ok(AccessTrace { n: w.len(), iterations, reads })
}

/// Traffic of a resampler without materialising its trace. With
/// `warp_limit = Some(m)`, only `m` warps spread evenly over the particle
/// array are replayed.
pub fn measure_traffic(
    algorithm: Algorithm,
    w: &WeightVector,
    iterations: usize,
    warp: WarpConfig,
    seed: u64,
    warp_limit: Option<usize>,
) -> Result<TrafficReport> {
    let warps = warp.warp_count(w.len());
    let sampled = match warp_limit {
        Some(0) => return invalid("warp sample must be non-empty"),
        Some(m) => m.min(warps),
        None => warps,
    };
    let mut acc = TrafficAccumulator::new(warp);
    for s in 0..sampled {
        let wi = s * warps / sampled;
        for reads in warp_reads(algorithm, w, iterations, warp, seed, wi)? {
            acc.push(&reads);
        }
    }
    Ok(acc.finish())
}
