//! Counter-based 64-bit random number generator.
//!
//! Every random draw in the crate (instance generation, block index
//! selection, randomized SVD test matrices, power-iteration start vectors)
//! goes through [`CounterRng`], so a `(seed, draw order)` pair pins down the
//! exact bit pattern of every instance and trajectory. The algorithm is
//! small enough to port to any language:
//!
//! ```text
//! GAMMA = 0x9E37_79B9_7F4A_7C15
//! word(counter) = mix(seed + (counter + 1) * GAMMA)        (wrapping arithmetic)
//! mix(z):  z = (z ^ (z >> 30)) * 0xBF58_476D_1CE4_E5B9
//!          z = (z ^ (z >> 27)) * 0x94D0_49BB_1331_11EB
//!          z ^ (z >> 31)
//! ```
//!
//! This is the SplitMix64 finalizer applied to a Weyl sequence, i.e. the
//! output stream is identical to SplitMix64 seeded with `seed`.
//!
//! Derived draws:
//! - `uniform()`: `(word >> 11) * 2^-53`, in `[0, 1)`.
//! - `below(p)`: rejection sampling; words below `2^64 mod p` are discarded,
//!   the rest reduced modulo `p`. No modulo bias.
//! - `normal()`: Box-Muller using two consecutive uniforms `u1, u2`,
//!   `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`. The sine branch is not used, so
//!   each normal consumes exactly two words.

use serde::{Deserialize, Serialize};

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterRng {
    seed: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    /// Independent generator for a named sub-stream of this seed.
    pub fn substream(seed: u64, stream: u64) -> Self {
        Self::new(mix(seed ^ mix(stream.wrapping_add(1).wrapping_mul(GAMMA))))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 64-bit words drawn so far.
    pub fn position(&self) -> u64 {
        self.counter
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.seed.wrapping_add(self.counter.wrapping_mul(GAMMA)))
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Uniform draw from `{0, .., p - 1}`.
    pub fn below(&mut self, p: usize) -> usize {
        assert!(p > 0, "below(0)");
        let p = p as u64;
        let threshold = p.wrapping_neg() % p;
        loop {
            let w = self.next_u64();
            if w >= threshold {
                return (w % p) as usize;
            }
        }
    }

    /// `k` distinct indices from `{0, .., n - 1}`, in draw order
    /// (partial Fisher-Yates).
    pub fn sample_distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot draw {k} distinct values from {n}");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }

    pub fn normal_vec(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.normal()).collect()
    }
}
