//! Label-addressed random streams.
//!
//! Every individual of a tree owns a 64-bit key derived from its parent's key
//! and its child index, and every independent ingredient (lifetime, motion,
//! marks, votes, ...) is drawn from its own generator seeded from that key.
//! Randomness therefore depends only on (master seed, replicate, label,
//! purpose): skipping a subtree, evaluating a different voting scheme on the
//! same tree, or changing the worker count never shifts any other draw.

use rand::rngs::SmallRng;
use rand::SeedableRng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer; a bijective avalanche mix of 64 bits.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Lifetime,
    Stable,
    Gaussian,
    SmallJumps,
    LargeJumps,
    Mark,
    Vote,
    Other(u32),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Lifetime => 1,
            Purpose::Stable => 2,
            Purpose::Gaussian => 3,
            Purpose::SmallJumps => 4,
            Purpose::LargeJumps => 5,
            Purpose::Mark => 6,
            Purpose::Vote => 7,
            Purpose::Other(k) => 0x100 + k as u64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey(pub u64);

impl StreamKey {
    pub fn new(master: u64) -> Self {
        StreamKey(mix64(master ^ GOLDEN))
    }

    /// Key of replicate `i` of a run seeded with `master`.
    pub fn replicate(master: u64, i: u64) -> Self {
        StreamKey(mix64(mix64(master ^ GOLDEN) ^ i.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// Key of child `i` (1, 2 or 3 in Ulam-Harris notation).
    #[inline]
    pub fn child(self, i: u8) -> Self {
        StreamKey(mix64(self.0.rotate_left(17) ^ (i as u64).wrapping_mul(GOLDEN)))
    }

    #[inline]
    pub fn rng(self, purpose: Purpose) -> SmallRng {
        SmallRng::seed_from_u64(mix64(self.0 ^ purpose.tag().wrapping_mul(0xD6E8_FEB8_6659_FD93)))
    }

    /// A derived key for an auxiliary computation (e.g. the k-th sub-experiment).
    pub fn derive(self, k: u64) -> Self {
        StreamKey(mix64(self.0 ^ mix64(k.wrapping_add(GOLDEN))))
    }
}
