//! Keyed random substreams.
//!
//! Every random quantity in the crate is drawn from a [`Stream`] whose key is
//! derived from a user seed and a path of indices (batch, repetition, grid
//! point, ...). Keys are mixed with the SplitMix64 finalizer, so a work item
//! produces the same numbers no matter which thread runs it or in what order.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
#[inline]
pub fn fmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit FNV-1a hash, used to turn labels into key components.
pub fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Hierarchical key identifying one substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        StreamKey(fmix64(seed.wrapping_add(GOLDEN_GAMMA)))
    }

    /// Derives the child key for `index`.
    pub fn child(self, index: u64) -> Self {
        StreamKey(fmix64(self.0 ^ fmix64(index.wrapping_add(GOLDEN_GAMMA))))
    }

    pub fn child_label(self, label: &str) -> Self {
        self.child(label_hash(label))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn stream(self) -> Stream {
        Stream::from_key(self)
    }
}

/// A uniform variate stored by its smaller tail.
///
/// `Lower(p)` means `u = p` and `Upper(s)` means `u = 1 - s`; in both cases
/// the stored value is at most 1/2 and exact, which keeps inverse-transform
/// sampling accurate in both tails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailUniform {
    Lower(f64),
    Upper(f64),
}

impl TailUniform {
    /// The variate as an ordinary probability (rounded near 1).
    pub fn value(self) -> f64 {
        match self {
            TailUniform::Lower(p) => p,
            TailUniform::Upper(s) => 1.0 - s,
        }
    }
}

/// ChaCha8 generator bound to one key.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
}

const TWO_POW_M53: f64 = 1.0 / 9_007_199_254_740_992.0;
const HALF_RANGE: u64 = 1 << 52;
const FULL_RANGE: u64 = 1 << 53;

impl Stream {
    pub fn from_key(key: StreamKey) -> Self {
        Stream { rng: ChaCha8Rng::seed_from_u64(key.value()) }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Draws one of the 2^53 cell midpoints `(k + 1/2) / 2^53` uniformly.
    #[inline]
    pub fn tail_uniform(&mut self) -> TailUniform {
        let k = self.rng.next_u64() >> 11;
        if k < HALF_RANGE {
            TailUniform::Lower((k as f64 + 0.5) * TWO_POW_M53)
        } else {
            TailUniform::Upper(((FULL_RANGE - k) as f64 - 0.5) * TWO_POW_M53)
        }
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn open01(&mut self) -> f64 {
        self.tail_uniform().value()
    }
}
