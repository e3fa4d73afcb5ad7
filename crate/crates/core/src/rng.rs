//! Counter-based deterministic random numbers (SplitMix64 in counter mode).
//!
//! Every draw is a pure function of `(seed, stream, counter)`, so replicas can
//! run in any order or in parallel and still produce bit-identical output on
//! every platform. Exact rational probabilities are consumed by comparing one
//! 64-bit uniform draw against cumulative thresholds that were rounded to
//! nearest once; the bias per decision is at most 2^-64.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A keyed stream of 64-bit values indexed by counter.
#[derive(Clone, Copy, Debug)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        CounterRng {
            key: mix64(mix64(seed) ^ stream.wrapping_mul(GOLDEN)),
        }
    }

    #[inline]
    pub fn draw(&self, counter: u64) -> u64 {
        mix64(self.key.wrapping_add(counter.wrapping_mul(GOLDEN)))
    }
}

/// Stable 64-bit hash of a word sequence, used to key policy tables.
pub fn hash_words(init: u64, words: impl IntoIterator<Item = u64>) -> u64 {
    let mut h = mix64(init ^ GOLDEN);
    for w in words {
        h = mix64(h ^ w.wrapping_mul(GOLDEN));
    }
    h
}
