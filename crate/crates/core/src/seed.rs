//! Named sub-seed derivation.
//!
//! Every source of randomness in the pipeline draws from one root seed
//! through a named channel, so that independent stages (synthesis, parameter
//! init, epoch shuffles) stay decoupled and reproducible.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive a deterministic sub-seed from a root seed and a channel label.
pub fn subseed(root: u64, label: &str) -> u64 {
    splitmix64(root ^ fnv1a(label.as_bytes()))
}

/// Sub-seed further keyed by an index (e.g. epoch number).
pub fn subseed_indexed(root: u64, label: &str, index: u64) -> u64 {
    splitmix64(subseed(root, label) ^ splitmix64(index))
}

/// Seeded generator for a named channel.
pub fn rng(root: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(subseed(root, label))
}

/// Seeded generator for a named, indexed channel.
pub fn rng_indexed(root: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(subseed_indexed(root, label, index))
}
