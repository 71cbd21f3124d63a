//! Seeded random streams.
//!
//! The generator is ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded through
//! `seed_from_u64`, whose output is specified independently of platform and
//! word size. Uniform floats take the top 53 bits of a `u64`; bounded integers
//! use Lemire's multiply-and-reject; normals use the ziggurat sampler from
//! `rand_distr`. All three are fixed here rather than delegated to whatever
//! `rand` considers its default, so streams stay stable across upgrades.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "Rng::below(0)");
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let wide = (self.next_u64() as u128) * (n as u128);
            if (wide as u64) >= threshold {
                return (wide >> 64) as usize;
            }
        }
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Fisher-Yates, from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// Index drawn proportionally to the non-negative `weights`.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut u = self.uniform() * total;
        for (i, &w) in weights.iter().enumerate() {
            if u < w {
                return i;
            }
            u -= w;
        }
        // Rounding can leave `u` a hair above the last bucket.
        weights
            .iter()
            .rposition(|&w| w > 0.0)
            .unwrap_or(weights.len() - 1)
    }
}

/// Matrix of i.i.d. standard-normal draws, filled row-major.
pub fn gaussian(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.normal()).collect();
    Matrix::new(rows, cols, data).expect("shape matches data")
}

/// Matrix of independent Bernoulli(p) indicators.
pub fn bernoulli_mask(rng: &mut Rng, rows: usize, cols: usize, p: f64) -> Result<Matrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    let data = (0..rows * cols)
        .map(|_| if rng.bernoulli(p) { 1.0 } else { 0.0 })
        .collect();
    Matrix::new(rows, cols, data)
}

/// Derives an independent stage seed from a root seed and a stage name:
/// FNV-1a over the name's bytes, xor the root, then one SplitMix64 round.
pub fn derive_seed(root: u64, stage: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(root ^ h)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_matrix() {
        let a = gaussian(&mut Rng::new(42), 7, 9);
        let b = gaussian(&mut Rng::new(42), 7, 9);
        assert_eq!(a.data(), b.data());
        let c = gaussian(&mut Rng::new(43), 7, 9);
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn stream_is_pinned() {
        // Frozen from the first run; guards against silent algorithm changes.
        let mut rng = Rng::new(42);
        let first: Vec<u64> = (0..3).map(|_| rng.next_u64()).collect();
        let mut again = Rng::new(42);
        assert_eq!(first, (0..3).map(|_| again.next_u64()).collect::<Vec<_>>());
        assert_eq!(first, PINNED_42.to_vec());
    }

    const PINNED_42: [u64; 3] = [
        12578764544318200737,
        17529487244874322312,
        7886285670807131020,
    ];

    #[test]
    fn gaussian_moments() {
        let m = gaussian(&mut Rng::new(1), 1000, 1000);
        let n = m.data().len() as f64;
        let mean = m.data().iter().sum::<f64>() / n;
        let var = m.data().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 0.01, "std {}", var.sqrt());
    }

    #[test]
    fn mask_extremes_and_rate() {
        let mut rng = Rng::new(3);
        assert!(bernoulli_mask(&mut rng, 5, 5, 1.0)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 1.0));
        assert!(bernoulli_mask(&mut rng, 5, 5, 0.0)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));
        let m = bernoulli_mask(&mut rng, 100, 1000, 0.7).unwrap();
        let frac = m.data().iter().sum::<f64>() / 1e5;
        assert!((frac - 0.7).abs() < 0.01, "fraction {frac}");
        assert!(matches!(
            bernoulli_mask(&mut rng, 1, 1, 1.5),
            Err(Error::InvalidProbability(_))
        ));
        assert!(bernoulli_mask(&mut rng, 1, 1, -0.1).is_err());
    }

    #[test]
    fn below_is_in_range_and_roughly_uniform() {
        let mut rng = Rng::new(9);
        let mut counts = [0usize; 6];
        for _ in 0..60_000 {
            counts[rng.below(6)] += 1;
        }
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 400.0, "{counts:?}");
        }
    }

    #[test]
    fn derived_seeds_differ_by_stage() {
        assert_eq!(derive_seed(1, "train"), derive_seed(1, "train"));
        assert_ne!(derive_seed(1, "train"), derive_seed(1, "split"));
        assert_ne!(derive_seed(1, "train"), derive_seed(2, "train"));
    }
}
