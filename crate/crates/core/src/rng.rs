//! Counter-based random streams.
//!
//! Every draw is a pure function of a `(seed, lane, counter)` triple, so
//! emulated threads never share generator state and the order in which
//! particles are processed cannot change any result. Lanes identify the
//! consumer of a stream (a particle, a warp, or the reserved global lane)
//! and counters enumerate the draws that consumer makes.
//!
//! The generator is SplitMix64 run in counter mode: each lane gets its own
//! 64-bit starting point (two rounds of the SplitMix finalizer over the seed
//! and lane), and draw `c` is the finalizer applied to
//! `start + (c + 1) * golden_gamma`.

use rand_core::RngCore;

use crate::error::{invalid, Result};

/// Lane reserved for draws shared by every particle (e.g. Megopolis offsets).
pub const GLOBAL_LANE: u64 = u64::MAX;

/// Counters at or above this bit are reserved for the second uniform of a
/// Gaussian draw; callers should keep their own counters below it.
pub const GAUSSIAN_PAIR_BIT: u64 = 1 << 63;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;
const LANE_SALT: u64 = 0xd1b5_4a32_d192_ed03;

#[inline(always)]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent seed for a named purpose, so that e.g. per-warp
/// draws never share a stream with per-particle draws of the same index.
pub fn derive_seed(seed: u64, domain: u64) -> u64 {
    mix64(mix64(seed ^ LANE_SALT).wrapping_add(mix64(domain.wrapping_add(GOLDEN_GAMMA))))
}

/// Coordinates of a single draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub lane: u64,
    pub counter: u64,
}

impl StreamKey {
    pub fn new(seed: u64, lane: u64, counter: u64) -> Self {
        Self { seed, lane, counter }
    }
}

/// A single lane of a seeded stream, with the lane mixing done once.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lane {
    start: u64,
}

impl Lane {
    #[inline]
    pub fn new(seed: u64, lane: u64) -> Self {
        Self {
            start: mix64(mix64(seed ^ LANE_SALT) ^ lane.wrapping_mul(GOLDEN_GAMMA)),
        }
    }

    #[inline(always)]
    pub fn bits(&self, counter: u64) -> u64 {
        mix64(
            self.start
                .wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)),
        )
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    #[inline(always)]
    pub fn uniform01(&self, counter: u64) -> f64 {
        (self.bits(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)` by 64x64->128 widening multiply. The
    /// residual bias is below `n / 2^64`. `n` must be non-zero.
    #[inline(always)]
    pub fn below(&self, counter: u64, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.bits(counter) as u128 * n as u128) >> 64) as u64
    }

    /// Standard normal via Box-Muller (cosine branch). Consumes counters
    /// `counter` and `counter | GAUSSIAN_PAIR_BIT`.
    #[inline]
    pub fn standard_normal(&self, counter: u64) -> f64 {
        // 1 - u lies in (0, 1], keeping the log finite.
        let u1 = 1.0 - self.uniform01(counter);
        let u2 = self.uniform01(counter | GAUSSIAN_PAIR_BIT);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// A sequential cursor over this lane starting at `counter`, for
    /// consumers that need a variable number of draws.
    pub fn cursor(self, counter: u64) -> LaneRng {
        LaneRng { lane: self, counter }
    }
}

/// Uniform real in `[0, 1)` for the given coordinates.
pub fn uniform01(key: StreamKey) -> f64 {
    Lane::new(key.seed, key.lane).uniform01(key.counter)
}

/// Uniform integer in `[0, n)`.
pub fn uniform_int(key: StreamKey, n: u64) -> Result<u64> {
    if n == 0 {
        return invalid("uniform_int requires n >= 1");
    }
    Ok(Lane::new(key.seed, key.lane).below(key.counter, n))
}

/// Normal draw with the given mean and standard deviation.
pub fn gaussian(key: StreamKey, mean: f64, stddev: f64) -> Result<f64> {
    if !(stddev >= 0.0) {
        return invalid(format!("stddev must be non-negative, got {stddev}"));
    }
    if stddev == 0.0 {
        return Ok(mean);
    }
    Ok(mean + stddev * Lane::new(key.seed, key.lane).standard_normal(key.counter))
}

/// `RngCore` adapter that walks one lane counter by counter.
#[derive(Debug, Clone)]
pub struct LaneRng {
    lane: Lane,
    counter: u64,
}

impl LaneRng {
    pub fn counter(&self) -> u64 {
        self.counter
    }
}

impl RngCore for LaneRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        let v = self.lane.bits(self.counter);
        self.counter += 1;
        v
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let v = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&v[..chunk.len()]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DRAWS: u64 = 1_000_000;

    #[test]
    fn uniform_is_deterministic_and_in_range() {
        let key = StreamKey::new(7, 0, 0);
        let a = uniform01(key);
        assert_eq!(a, uniform01(key));
        assert!((0.0..1.0).contains(&a));
        assert_ne!(a, uniform01(StreamKey::new(8, 0, 0)));
    }

    #[test]
    fn uniform_mean() {
        let lane = Lane::new(7, 0);
        let mean = (0..DRAWS).map(|c| lane.uniform01(c)).sum::<f64>() / DRAWS as f64;
        assert!((mean - 0.5).abs() < 0.003, "mean {mean}");
    }

    #[test]
    fn uniform_int_edges() {
        assert_eq!(uniform_int(StreamKey::new(1, 2, 3), 0), Err(crate::Error::InvalidArgument("uniform_int requires n >= 1".into())));
        for c in 0..1000 {
            assert_eq!(uniform_int(StreamKey::new(3, 1, c), 1).unwrap(), 0);
            assert!(uniform_int(StreamKey::new(3, 1, c), 1 << 20).unwrap() < 1 << 20);
        }
    }

    #[test]
    fn uniform_int_buckets() {
        let lane = Lane::new(11, 5);
        let mut counts = [0u64; 16];
        for c in 0..DRAWS {
            counts[lane.below(c, 16) as usize] += 1;
        }
        for (b, &n) in counts.iter().enumerate() {
            let f = n as f64 / DRAWS as f64;
            assert!((f - 1.0 / 16.0).abs() < 0.002, "bucket {b}: {f}");
        }
    }

    #[test]
    fn gaussian_moments() {
        assert_eq!(gaussian(StreamKey::new(1, 1, 1), 3.5, 0.0).unwrap(), 3.5);
        assert!(gaussian(StreamKey::new(1, 1, 1), 0.0, -1.0).is_err());

        let xs: Vec<f64> = (0..DRAWS)
            .map(|c| gaussian(StreamKey::new(42, 9, c), 0.0, 1.0).unwrap())
            .collect();
        let m = xs.iter().sum::<f64>() / DRAWS as f64;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (DRAWS - 1) as f64;
        assert!((v - 1.0).abs() < 0.01, "variance {v}");

        let m5 = (0..DRAWS)
            .map(|c| gaussian(StreamKey::new(43, 2, c), 5.0, 2.0).unwrap())
            .sum::<f64>()
            / DRAWS as f64;
        assert!((m5 - 5.0).abs() < 0.01, "mean {m5}");
    }

    #[test]
    fn lanes_uncorrelated() {
        let n = 100_000u64;
        for (la, lb) in [(0u64, 1u64), (5, 6), (0, GLOBAL_LANE), (31, 32)] {
            let a = Lane::new(99, la);
            let b = Lane::new(99, lb);
            let xs: Vec<f64> = (0..n).map(|c| a.uniform01(c)).collect();
            let ys: Vec<f64> = (0..n).map(|c| b.uniform01(c)).collect();
            let mx = xs.iter().sum::<f64>() / n as f64;
            let my = ys.iter().sum::<f64>() / n as f64;
            let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
            for (x, y) in xs.iter().zip(&ys) {
                sxy += (x - mx) * (y - my);
                sxx += (x - mx) * (x - mx);
                syy += (y - my) * (y - my);
            }
            let rho = sxy / (sxx * syy).sqrt();
            assert!(rho.abs() < 0.01, "lanes {la},{lb}: rho {rho}");
        }
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn cursor_matches_lane() {
        let lane = Lane::new(5, 6);
        let mut rng = lane.cursor(10);
        assert_eq!(rng.next_u64(), lane.bits(10));
        assert_eq!(rng.next_u64(), lane.bits(11));
        assert_eq!(rng.counter(), 12);
    }
}
