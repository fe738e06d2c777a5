//! Portable deterministic random numbers.
//!
//! Every stochastic step in the crate (synthetic rasters, weight
//! initialization, epoch shuffling) draws from [`SplitMix64`] so that a
//! given seed yields the same stream in any implementation:
//!
//! ```text
//! state = state + 0x9E3779B97F4A7C15          (wrapping)
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9     (wrapping)
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB     (wrapping)
//! return z ^ (z >> 31)
//! ```
//!
//! * `uniform()` is `(next_u64() >> 11) * 2^-53`, a value in `[0, 1)`.
//! * `gaussian()` is one Box–Muller draw consuming exactly two uniforms:
//!   `u1 = 1 - uniform()`, `u2 = uniform()`,
//!   `sqrt(-2 ln u1) * cos(2π u2)`. The sine partner is discarded so that
//!   each call consumes a fixed number of words.

use std::f64::consts::TAU;

#[derive(Debug, Clone)]
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

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    }

    /// Uniform integer in `0..n` by multiply-shift on the top 32 bits.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (((self.next_u64() >> 32) * n as u64) >> 32) as usize
    }

    /// Fisher–Yates, drawing `below(i + 1)` for `i` from the last index down.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
