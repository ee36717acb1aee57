//! Deterministic seed derivation.
//!
//! All randomized operations in this crate take an explicit `u64` seed and
//! run on `ChaCha8Rng`, which has a stable stream across platforms and
//! releases. Sub-seeds are derived by hashing the parent seed together with
//! string tags, so every cell of a benchmark grid gets an independent,
//! reproducible stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

/// FNV-1a over a byte slice. Used instead of `DefaultHasher` because the
/// stdlib hasher is not guaranteed stable between compiler releases.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Derive a child seed from a base seed and a sequence of tags.
pub fn derive_seed(base: u64, tags: &[&str]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in &base.to_le_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    for tag in tags {
        // length-prefix each tag so ["ab","c"] != ["a","bc"]
        for &b in &(tag.len() as u64).to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
        for &b in tag.as_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// The crate-standard RNG for a given seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
