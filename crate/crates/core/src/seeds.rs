//! Deterministic derivation of child RNG seeds from a master seed.

/// SplitMix64 finalizer applied to `master ⊕ golden·(index+1)`.
///
/// Child streams are stable when more indices are added later.
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a path of indices, folded left to right.
pub fn split_path(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(master, |s, &i| split_seed(s, i))
}
