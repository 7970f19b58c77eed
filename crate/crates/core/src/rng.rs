//! Seed handling. Every random stream in the crate is a ChaCha8 generator whose
//! seed is derived from a user seed plus a few stream identifiers, so results
//! never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a list of stream ids.
pub fn derive(seed: u64, stream: &[u64]) -> u64 {
    stream.iter().fold(mix64(seed), |acc, &s| mix64(acc ^ mix64(s)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_for(seed: u64, stream: &[u64]) -> Rng {
    rng(derive(seed, stream))
}
