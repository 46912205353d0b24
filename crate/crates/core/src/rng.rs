//! Seeded random streams shared by the generators and the noise model.
//!
//! Every draw is a fixed transform of ChaCha20 output, so any implementation
//! of ChaCha20 reproduces the datasets from `(seed, stream)` alone.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

/// Description recorded in dataset manifests.
pub const ALGORITHM: &str = "chacha20: key = seed as u64 little-endian in bytes 0..8, zero elsewhere; \
stream id selects the purpose (1 = phantom, 2 = noise); nonce counter from 0; \
uniform = (next_u64 >> 11) * 2^-53; integer in [lo, hi] = lo + floor(uniform * (hi - lo + 1)); \
normal = Box-Muller pairs (r cos t, r sin t), r = sqrt(-2 ln(1 - u1)), t = 2 pi u2; \
rayleigh = sqrt(-2 ln(1 - u))";

pub const PHANTOM_STREAM: u64 = 1;
pub const NOISE_STREAM: u64 = 2;

#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha20Rng,
    spare_normal: Option<f64>,
}

impl Stream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(stream);
        Stream { rng, spare_normal: None }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn int_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        debug_assert!(lo <= hi);
        let n = (hi - lo + 1) as f64;
        lo + ((self.uniform() * n) as usize).min(hi - lo)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard normal via Box-Muller, consuming draws in pairs.
    pub fn normal(&mut self) -> f64 {
        if let Some(v) = self.spare_normal.take() {
            return v;
        }
        let r = (-2.0 * (1.0 - self.uniform()).ln()).sqrt();
        let t = std::f64::consts::TAU * self.uniform();
        self.spare_normal = Some(r * t.sin());
        r * t.cos()
    }

    /// Rayleigh with unit scale.
    pub fn rayleigh(&mut self) -> f64 {
        (-2.0 * (1.0 - self.uniform()).ln()).sqrt()
    }
}
