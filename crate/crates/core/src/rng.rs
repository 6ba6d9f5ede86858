//! Seeded randomness for fixtures.
//!
//! Every random draw in the crate goes through [`SeededStream`], a ChaCha20
//! keystream whose 256-bit key is the little-endian seed in the first eight
//! bytes followed by zeros (nonce and stream id zero). Uniform reals are
//! `(next_u64 >> 11) · 2⁻⁵³`. Any ChaCha20 implementation reproduces the
//! same fixtures from the same seed.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone)]
pub struct SeededStream {
    inner: ChaCha20Rng,
}

impl SeededStream {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        Self {
            inner: ChaCha20Rng::from_seed(key),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}
