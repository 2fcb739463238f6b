//! Seeded random streams for inputs and weight initialization.
//!
//! The generator is xoshiro256** with its state filled by splitmix64 from a
//! single `u64` seed. Floating-point draws are defined on top of the raw
//! 64-bit outputs so another implementation can reproduce them exactly:
//!
//! - `uniform()`: `(next_u64() >> 11) · 2⁻⁵³`, in `[0, 1)`
//! - `gaussian()`: Box–Muller on two consecutive raw draws `a`, `b`:
//!   `u1 = ((a >> 11) + 1) · 2⁻⁵³` in `(0, 1]`, `u2 = (b >> 11) · 2⁻⁵³`,
//!   result `sqrt(-2 ln u1) · cos(2π u2)`. The sine half is discarded.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::{SplitMix64, Xoshiro256StarStar};

use crate::tensor::Tensor;

const TWO_POW_NEG_53: f64 = 1.0 / (1u64 << 53) as f64;

pub struct Rng {
    inner: Xoshiro256StarStar,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256StarStar::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * TWO_POW_NEG_53
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn gaussian(&mut self) -> f64 {
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * TWO_POW_NEG_53;
        let u2 = (self.next_u64() >> 11) as f64 * TWO_POW_NEG_53;
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// `rows×cols` matrix of standard normal draws, filled row-major.
    pub fn gaussian_matrix(&mut self, rows: usize, cols: usize) -> Tensor {
        Tensor::from_fn(rows, cols, |_, _| self.gaussian())
    }

    /// `rows×cols` matrix uniform in `[-1/√rows, 1/√rows)`, filled row-major.
    /// `rows` is the fan-in of a right-multiplied weight.
    pub fn fan_in_matrix(&mut self, rows: usize, cols: usize) -> Tensor {
        let bound = 1.0 / (rows.max(1) as f64).sqrt();
        Tensor::from_fn(rows, cols, |_, _| self.uniform_in(-bound, bound))
    }

    /// Derives an independent seed from a base seed and a case key.
    pub fn derive_seed(base: u64, key: &[u64]) -> u64 {
        let mut s = SplitMix64::seed_from_u64(base);
        let mut acc = s.next_u64();
        for &k in key {
            s = SplitMix64::seed_from_u64(acc ^ k);
            acc = s.next_u64();
        }
        acc
    }
}
