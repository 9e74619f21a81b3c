//! Deterministic seed derivation.
//!
//! Child seeds are `splitmix64(parent ^ splitmix64(stream + 1))`, so every
//! (parent, stream) pair yields an independent, reproducible ChaCha8 stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Human-readable description of the derivation rule, embedded in reports.
pub const SEED_RULE: &str = "child = splitmix64(parent ^ splitmix64(stream + 1)); rng = ChaCha8(child)";

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(parent: u64, stream: u64) -> u64 {
    splitmix64(parent ^ splitmix64(stream.wrapping_add(1)))
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
