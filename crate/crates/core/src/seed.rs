//! Deterministic seed derivation.
//!
//! A single master seed fans out to every stage, sample, and ablation cell by
//! hashing the master seed with a label path. The hash is fixed here (FNV-1a
//! with a splitmix64 finalizer) so artifacts reproduce across runs and
//! platforms.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `master` and a label path such as
/// `["train-vq", "pet"]` or `["phantom", "17"]`.
pub fn derive(master: u64, path: &[&str]) -> u64 {
    let mut h = FNV_OFFSET ^ master;
    for part in path {
        for &b in part.as_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
        // separator so ["ab","c"] != ["a","bc"]
        h ^= 0xff;
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h)
}

/// Derive a child seed with a numeric component.
pub fn derive_indexed(master: u64, label: &str, index: u64) -> u64 {
    let mut h = FNV_OFFSET ^ master;
    for &b in label.as_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h ^= index;
    h = h.wrapping_mul(FNV_PRIME);
    splitmix64(h)
}

/// Seeded RNG used throughout the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_is_stable_and_label_sensitive() {
        let a = derive(42, &["train-vq", "pet"]);
        let b = derive(42, &["train-vq", "pet"]);
        assert_eq!(a, b);
        assert_ne!(a, derive(42, &["train-vq", "ct"]));
        assert_ne!(a, derive(43, &["train-vq", "pet"]));
        // separator keeps concatenations apart
        assert_ne!(derive(1, &["ab", "c"]), derive(1, &["a", "bc"]));
    }

    #[test]
    fn indexed_derivation_spreads() {
        let s: Vec<u64> = (0..100).map(|i| derive_indexed(7, "phantom", i)).collect();
        let mut dedup = s.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), s.len());
    }
}
