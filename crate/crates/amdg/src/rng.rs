//! Portable deterministic randomness.
//!
//! Every seeded operation in this toolkit draws from the same fixed 64-bit
//! generator, SplitMix64 (Steele, Lea & Flood 2014), rather than a
//! platform or framework default, so a seed such as 12345 selects the same
//! sample on every machine and in any reimplementation. The generator and
//! the selection procedure below are small enough to restate in a few lines
//! in another language, which is exactly the point.
//!
//! State update and output, in full:
//!
//! ```text
//! state  = state + 0x9E3779B97F4A7C15          (mod 2^64)
//! z      = state
//! z      = (z xor (z >> 30)) * 0xBF58476D1CE4E5B9
//! z      = (z xor (z >> 27)) * 0x94D049BB133111EB
//! output = z xor (z >> 31)
//! ```
//!
//! Domain-scoped substreams are derived by seeding a new generator with
//! `seed xor fnv1a64(label)` where `fnv1a64` is the 64-bit FNV-1a hash of
//! the label's UTF-8 bytes.

/// SplitMix64 generator. Copy, don't share: it is four lines of state.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Substream for `(seed, label)`; see the module docs for the rule.
    pub fn scoped(seed: u64, label: &str) -> Self {
        SplitMix64::new(seed ^ fnv1a64(label.as_bytes()))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw from `0..bound` by modulo reduction.
    ///
    /// The modulo bias is below 2^-32 for any bound this toolkit meets and
    /// is accepted in exchange for a selection rule that can be restated
    /// exactly.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        self.next_u64() % bound
    }
}

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

/// Choose `k` distinct indices out of `0..n`, uniformly without replacement,
/// returned in ascending order.
///
/// Procedure: a partial Fisher–Yates pass over the index vector `[0..n)`.
/// For `i` in `0..k`, swap position `i` with position `i + (next_u64() mod
/// (n - i))`; the first `k` positions are the sample, then sorted.
pub fn sample_indices(rng: &mut SplitMix64, n: usize, k: usize) -> Vec<usize> {
    assert!(k <= n, "cannot sample {k} of {n}");
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.next_below((n - i) as u64) as usize;
        indices.swap(i, j);
    }
    let mut chosen = indices[..k].to_vec();
    chosen.sort_unstable();
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_stream_values() {
        // First outputs for seed 1234567, cross-checked against an
        // independent implementation of the published algorithm.
        let mut rng = SplitMix64::new(1234567);
        assert_eq!(rng.next_u64(), 6457827717110365317);
        assert_eq!(rng.next_u64(), 3203168211198807973);
        assert_eq!(rng.next_u64(), 9817491932198370423);
    }

    #[test]
    fn fnv_vector() {
        // Standard FNV-1a test vectors.
        assert_eq!(fnv1a64(b""), 0xCBF2_9CE4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xAF63_DC4C_8601_EC8C);
    }

    #[test]
    fn sample_is_sorted_distinct_and_stable() {
        let mut rng = SplitMix64::new(12345);
        let a = sample_indices(&mut rng, 100, 10);
        let mut rng = SplitMix64::new(12345);
        let b = sample_indices(&mut rng, 100, 10);
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn full_sample_is_identity() {
        let mut rng = SplitMix64::new(7);
        assert_eq!(sample_indices(&mut rng, 5, 5), vec![0, 1, 2, 3, 4]);
    }
}
