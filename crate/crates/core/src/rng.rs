//! Seeded random number generation.
//!
//! Every random draw in the crate goes through [`seeded_rng`]: ChaCha8 from
//! `rand_chacha`, seeded with `SeedableRng::seed_from_u64`. Normal samples
//! use `rand_distr::Normal`. Results are bit-reproducible for a given seed
//! within this implementation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream for a named purpose from a base seed.
pub fn derived_rng(seed: u64, purpose: u64) -> Rng {
    // splitmix64 finalizer to decorrelate nearby seeds
    let mut z = seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}
