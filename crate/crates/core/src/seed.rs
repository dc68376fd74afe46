//! Deterministic seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator seeded from a
//! 64-bit value. Streams are never shared between work items: a stage seed is
//! split into substreams by index, so the values drawn for item `i` do not
//! depend on how items are scheduled across threads.
//!
//! Splitting rules:
//!
//! * `derive_seed(master, stage)` = `mix(master ^ fnv1a64(stage))`
//! * `substream(seed, index)` = `mix(seed ^ mix(index + GOLDEN))`
//!
//! where `mix` is the SplitMix64 finalizer and `GOLDEN` is `0x9E3779B97F4A7C15`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01B3);
    }
    h
}

/// Seed for a named pipeline stage, derived from the master seed.
pub fn derive_seed(master: u64, stage: &str) -> u64 {
    mix(master ^ fnv1a64(stage.as_bytes()))
}

/// Seed for the `index`-th independent substream of `seed`.
pub fn substream(seed: u64, index: u64) -> u64 {
    mix(seed ^ mix(index.wrapping_add(GOLDEN)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
