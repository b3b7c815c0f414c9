//! Halton low-discrepancy points.

const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Van der Corput radical inverse of `index` in `base`. Lies in (0, 1) for
/// every `index >= 1`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut scale = inv_base;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * scale;
        index /= base;
        scale *= inv_base;
    }
    out
}

/// Point `index` of the `dims`-dimensional Halton sequence (one prime base
/// per dimension).
pub fn halton_point(index: u64, dims: usize) -> Vec<f64> {
    assert!(dims <= PRIMES.len(), "at most {} Halton dimensions", PRIMES.len());
    PRIMES[..dims].iter().map(|&b| radical_inverse(index, b)).collect()
}

/// Start index derived from a seed. Never zero, so no coordinate is 0.
pub fn seeded_offset(seed: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    1 + (z % (1 << 24))
}
