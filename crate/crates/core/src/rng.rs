//! Deterministic seed derivation.
//!
//! Every stochastic component receives its own ChaCha stream whose seed is a
//! pure function of the master seed and a path of indices, so results do not
//! depend on evaluation order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `seed` and a stream label.
pub fn derive(seed: u64, label: u64) -> u64 {
    mix64(seed ^ mix64(label.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

pub fn derive_path(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(seed, |s, &l| derive(s, l))
}

pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
