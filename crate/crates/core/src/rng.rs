//! Deterministic random streams.
//!
//! Every Monte Carlo replicate gets its own generator, seeded from a hash of
//! `(master seed, cell index, replicate index)`. Results therefore depend only
//! on the master seed, never on how replicates are scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// A seeded ChaCha8 stream.
#[derive(Debug, Clone)]
pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Substream for replicate `rep` of grid cell `cell`.
    pub fn for_replicate(master: u64, cell: u64, rep: u64) -> Self {
        Rng::new(substream_seed(master, cell, rep))
    }

    pub fn std_normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits.
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// The SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn substream_seed(master: u64, cell: u64, rep: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ cell) ^ rep)
}
