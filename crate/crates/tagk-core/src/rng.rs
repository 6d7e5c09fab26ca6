//! Seeded random streams.
//!
//! Counter-based ChaCha streams so that every estimator instance, episode,
//! and noise source owns an independent, reproducible generator derived from
//! `(base_seed, stream_id)`.

use libm::{cos, log, sin, sqrt};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Deterministic stream generator.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
    spare_gauss: Option<f64>,
}

impl Stream {
    /// Independent stream derived from `(base_seed, stream_id)`.
    pub fn derive(base_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
        rng.set_stream(stream_id);
        Stream {
            rng,
            spare_gauss: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Modulo bias is negligible for the small n used here, but reject
        // the tail anyway so the draw is exact.
        let bound = u64::MAX - u64::MAX % n as u64;
        loop {
            let x = self.rng.next_u64();
            if x < bound {
                return (x % n as u64) as usize;
            }
        }
    }

    /// Standard normal via Box-Muller.
    pub fn gauss(&mut self) -> f64 {
        if let Some(z) = self.spare_gauss.take() {
            return z;
        }
        // u1 in (0,1] to keep log finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = sqrt(-2.0 * log(u1));
        let t = 2.0 * core::f64::consts::PI * u2;
        self.spare_gauss = Some(r * sin(t));
        r * cos(t)
    }

    /// Zero-mean normal with standard deviation `sigma`.
    pub fn gauss_scaled(&mut self, sigma: f64) -> f64 {
        if sigma == 0.0 {
            return 0.0;
        }
        sigma * self.gauss()
    }

    /// Sample an index with probability proportional to `weights[i]`.
    /// Weights must be non-negative with a positive sum.
    pub fn weighted_index(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        debug_assert!(total > 0.0, "weighted_index: non-positive weight sum");
        let mut u = self.uniform() * total;
        for (i, w) in weights.iter().enumerate() {
            u -= w;
            if u < 0.0 {
                return i;
            }
        }
        // Rounding can leave u barely non-negative; last positive weight wins.
        weights
            .iter()
            .rposition(|w| *w > 0.0)
            .expect("weighted_index: all-zero weights")
    }
}
