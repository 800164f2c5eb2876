//! Seeded, platform-independent random stream.
//!
//! Backed by PCG XSL RR 128/64 (`Pcg64`, multiplier
//! `0x2360ED051FC65DA44385DF649FCCF645`, default increment
//! `0x5851F42D4C957F2D14057B7EF767814F`). Floats are built from the top 53
//! bits of each `u64` draw so the stream never depends on a distribution
//! implementation.

use rand_core::{Rng as _, SeedableRng};
use rand_pcg::Pcg64;

#[derive(Debug, Clone)]
pub struct Rng {
    inner: Pcg64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn seed_from_u64(seed: u64) -> Self {
        Rng {
            inner: Pcg64::seed_from_u64(seed),
        }
    }

    /// Independent child stream for item `index` of a batch seeded with `seed`:
    /// `splitmix64(seed ^ (0x9E3779B97F4A7C15 * (index + 1)))`.
    pub fn split(seed: u64, index: u64) -> Self {
        let mixed = seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1));
        Rng::seed_from_u64(splitmix64(mixed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`; returns `lo` when the range is empty.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return lo;
        }
        lo + (hi - lo) * self.next_f64()
    }

    /// `true` with probability `p`. Always consumes one draw.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Uniform integer in `[0, n)`, `n > 0`.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Multiply-shift reduction; bias is below 2^-64 * n.
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal via Box–Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}
