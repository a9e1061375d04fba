//! Seeded random streams.
//!
//! One master seed fans out to named substreams (init / data / noise / mask /
//! langevin / …) so each consumer draws from an independent, reproducible
//! sequence. The generator is SplitMix64 with the usual fixed constants and
//! Gaussians come from Box–Muller, so a given (seed, label, position) yields
//! the same value on every platform.

use crate::tensor::Tensor;
use alloc::vec::Vec;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over the label bytes; used only to derive substream seeds.
fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A deterministic random stream (SplitMix64 core).
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    state: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed, state: seed }
    }

    /// Seed this stream was created with.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent substream. Deterministic in (seed, label) only,
    /// regardless of how much the parent stream has been consumed.
    pub fn substream(&self, label: &str) -> RngStream {
        RngStream::new(mix64(self.seed ^ fnv1a(label)))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform index in [0, n). Lemire reduction; deterministic.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal via Box–Muller. Consumes exactly two u64 draws.
    pub fn normal(&mut self) -> f64 {
        // u1 in (0, 1] so the log is finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}

/// `n` i.i.d. draws from N(mean, cov_diag_scale·I), one row per draw.
///
/// `cov_diag_scale` is the diagonal of the covariance, so the per-component
/// standard deviation is its square root; scale 0 returns `n` copies of the
/// mean.
pub fn sample_gaussian(rng: &mut RngStream, mean: &[f64], cov_diag_scale: f64, n: usize) -> Tensor {
    debug_assert!(cov_diag_scale >= 0.0);
    let std = libm::sqrt(cov_diag_scale);
    let dim = mean.len();
    let mut data = Vec::with_capacity(n * dim);
    for _ in 0..n {
        for &m in mean {
            data.push(m + std * rng.normal());
        }
    }
    Tensor::from_vec(n, dim, data).expect("sample_gaussian: internal shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = RngStream::new(111);
        let mut b = RngStream::new(111);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn substreams_are_independent_of_consumption() {
        let parent = RngStream::new(111);
        let mut c1 = parent.substream("data");
        let mut consumed = parent.clone();
        for _ in 0..17 {
            consumed.next_u64();
        }
        let mut c2 = consumed.substream("data");
        for _ in 0..32 {
            assert_eq!(c1.next_u64(), c2.next_u64());
        }
        let mut other = parent.substream("noise");
        assert_ne!(parent.substream("data").next_u64(), other.next_u64());
    }

    #[test]
    fn gaussian_scale_zero_copies_mean() {
        let mut rng = RngStream::new(7);
        let t = sample_gaussian(&mut rng, &[1.5, -2.0], 0.0, 4);
        for r in 0..4 {
            assert_eq!(t.row(r), &[1.5, -2.0]);
        }
    }

    #[test]
    fn gaussian_same_position_same_output() {
        let mut a = RngStream::new(42).substream("noise");
        let mut b = RngStream::new(42).substream("noise");
        let ta = sample_gaussian(&mut a, &[0.0; 3], 1.0, 10);
        let tb = sample_gaussian(&mut b, &[0.0; 3], 1.0, 10);
        assert_eq!(ta.data(), tb.data());
    }

    #[test]
    fn gaussian_clt_mean_bound() {
        // 10_000 draws per axis: sample mean should be within 0.05 of 0.
        let mut rng = RngStream::new(111);
        let t = sample_gaussian(&mut rng, &[0.0, 0.0], 1.0, 10_000);
        for c in 0..2 {
            let mean: f64 = (0..10_000).map(|r| t.get(r, c)).sum::<f64>() / 10_000.0;
            assert!(mean.abs() < 0.05, "axis {c} sample mean {mean}");
        }
    }

    #[test]
    fn normal_moments_sane() {
        let mut rng = RngStream::new(3);
        let n = 20_000;
        let draws: alloc::vec::Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.03);
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut rng = RngStream::new(9);
        let mut v: alloc::vec::Vec<usize> = (0..50).collect();
        rng.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<alloc::vec::Vec<_>>());
    }
}
