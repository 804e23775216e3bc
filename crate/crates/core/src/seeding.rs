//! Deterministic seed derivation shared by simulation and the random
//! ensembles.
//!
//! A master seed plus a list of context words (trial index, chunk index, cell
//! parameters) is folded through the splitmix64 finalizer into the 64-bit seed
//! of a ChaCha8 stream. Every derived stream is independent of how work is
//! scheduled, which is what makes output byte-identical for any thread count.

/// Name recorded alongside seeds in outputs so data files say how their
/// randomness was produced.
pub const GENERATOR_NAME: &str = "chacha8-splitmix64";

/// splitmix64 finalizer; bijective on u64.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds context words into a master seed. Order matters, so
/// derive_seed(m, &[a, b]) and derive_seed(m, &[b, a]) differ.
pub fn derive_seed(master: u64, words: &[u64]) -> u64 {
    let mut h = mix64(master);
    for &w in words {
        h = mix64(h ^ mix64(w));
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix64_is_stable() {
        // Frozen values so a refactor can't silently change every seed.
        assert_eq!(mix64(0), 0xe220_a839_7b1d_cdaf);
        assert_eq!(mix64(1), 0x910a_2dec_8902_5cc1);
        assert_eq!(mix64(0xdead_beef), 0x4adf_b90f_68c9_eb9b);
    }

    #[test]
    fn derivation_separates_contexts() {
        let m = 42;
        assert_ne!(derive_seed(m, &[0]), derive_seed(m, &[1]));
        assert_ne!(derive_seed(m, &[1, 2]), derive_seed(m, &[2, 1]));
        assert_ne!(derive_seed(m, &[]), m);
        assert_eq!(derive_seed(m, &[7, 9]), derive_seed(m, &[7, 9]));
    }
}
