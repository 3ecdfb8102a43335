//! Minimal deterministic pseudo random number generator.
//!
//! Measured constants and randomized checks must reproduce bit for bit
//! across runs and across dependency upgrades, so we ship a fixed
//! SplitMix64 instead of depending on an external RNG crate.

use crate::scalar::{cast, Scalar};

/// Default seed for measured-constant estimation.
pub const DEFAULT_SEED: u64 = 0x5EED;

/// SplitMix64 generator (Steele, Lea, Flood 2014).
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform<T: Scalar>(&mut self, lo: T, hi: T) -> T {
        lo + (hi - lo) * cast::<T>(self.next_f64())
    }

    /// Vector of uniform samples in `[lo, hi)`.
    pub fn uniform_vec<T: Scalar>(&mut self, n: usize, lo: T, hi: T) -> Vec<T> {
        (0..n).map(|_| self.uniform(lo, hi)).collect()
    }
}
