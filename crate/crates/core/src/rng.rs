//! Seeded randomness shared by every stochastic stage.
//!
//! Generator: xoshiro256** (Blackman & Vigna), state expanded from a 64-bit
//! seed with SplitMix64, as implemented by `rand_xoshiro` 0.7. Uniform
//! doubles take the top 53 bits of `next_u64`: `(x >> 11) * 2^-53`.
//! Independent streams (one per topic count, one per synthetic corpus…)
//! use `derive_seed(seed, stream)`, the SplitMix64 output function applied
//! to `seed + (stream + 1) * 0x9E3779B97F4A7C15` (wrapping).

use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

pub const GENERATOR: &str = "xoshiro256**/splitmix64-v1";

pub struct Rng(Xoshiro256StarStar);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(Xoshiro256StarStar::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)` by rejection, free of modulo bias.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.0.next_u64();
            if x < zone {
                return (x % n) as usize;
            }
        }
    }
}

pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
