//! Deterministic seed derivation and config hashing.
//!
//! Every randomized stage owns a ChaCha generator seeded through
//! [`derive_seed`], so sub-streams (per scenario, per courier, per purpose)
//! are independent and platform-stable.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; decorrelates related seed inputs.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed from a master seed and a stream label.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream))
}

/// Seeded generator for one derived stream.
pub fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream))
}

/// FNV-1a over the canonical byte form of a config; embedded in output
/// artifacts so runs are attributable to their exact inputs.
pub fn config_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_per_stream() {
        let a = derive_seed(42, 0);
        let b = derive_seed(42, 1);
        let c = derive_seed(43, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn derivation_is_stable() {
        // Frozen values: a change here breaks every recorded artifact.
        assert_eq!(splitmix64(0), 0xe220a8397b1dcdaf);
        assert_eq!(derive_seed(42, 7), derive_seed(42, 7));
    }

    #[test]
    fn fnv_hash_matches_reference_vector() {
        // FNV-1a("a") from the published reference table.
        assert_eq!(config_hash(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(config_hash(b""), 0xcbf29ce484222325);
    }
}
