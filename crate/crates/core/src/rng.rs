//! Deterministic random streams.
//!
//! Every stochastic step in the crate (weight init, shuffling, dropout masks,
//! augmentation draws) pulls from an [`RngStream`]. The generator and every
//! derived transform are fixed here so a recorded seed reproduces bit-identical
//! draws across platforms and runs:
//!
//! - core generator: ChaCha8 (`rand_chacha::ChaCha8Rng`), seeded with
//!   `seed_from_u64`;
//! - `uniform`: the high 53 bits of one `u64` draw, scaled by 2^-53, giving
//!   a double in `[0, 1)`;
//! - `normal`: Box-Muller on two uniform draws,
//!   `sqrt(-2 ln u1) * cos(2 pi u2)` with `u1` shifted into `(0, 1]`;
//! - `index(n)`: one `u64` draw reduced modulo `n`;
//! - `shuffle`: Fisher-Yates using `index`;
//! - `derive(tag)`: child seed = splitmix64 finalizer of
//!   `seed ^ (0x9E3779B97F4A7C15 * (tag + 1))`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// A seeded, splittable random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// The seed this stream was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// An independent child stream identified by `tag`.
    ///
    /// Children depend only on the parent's seed and the tag, never on how
    /// far the parent has advanced, so per-item streams can be handed to
    /// worker threads in any order.
    pub fn derive(&self, tag: u64) -> RngStream {
        RngStream::new(splitmix64(self.seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(tag.wrapping_add(1))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform double in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform double in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal draw (mean 0, variance 1) via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform(); // (0, 1]: keeps ln finite
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// True with probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform index in `0..n`. Panics when `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index: empty range");
        (self.next_u64() % n as u64) as usize
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}

/// splitmix64 finalizer (Steele, Lea & Flood 2014), used for seed derivation.
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
