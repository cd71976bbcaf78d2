//! Seeded, splittable random number generation.
//!
//! Every randomized operation in this crate takes an [`RngSeed`] instead of an
//! implicit thread-local generator, so identical seeds reproduce identical
//! streams bit for bit. Seeds can be split with [`RngSeed::derive`] so that
//! parallel ensemble members draw independent streams whose contents do not
//! depend on scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A 64-bit seed for a deterministic random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        RngSeed(seed)
    }

    /// Derives an independent child seed from this seed and a salt.
    ///
    /// The mapping is a SplitMix64 finalizer over the xor of the two inputs,
    /// so distinct salts yield well-separated child streams and the result is
    /// identical on every platform.
    pub fn derive(self, salt: u64) -> RngSeed {
        RngSeed(splitmix64(self.0 ^ splitmix64(salt.wrapping_add(0x9e37_79b9_7f4a_7c15))))
    }

    /// Instantiates the deterministic generator for this seed.
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for RngSeed {
    fn from(seed: u64) -> Self {
        RngSeed(seed)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn identical_seeds_reproduce_streams() {
        let mut a = RngSeed::new(7).rng();
        let mut b = RngSeed::new(7).rng();
        for _ in 0..100 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
    }

    #[test]
    fn derived_seeds_differ_by_salt() {
        let base = RngSeed::new(42);
        let a = base.derive(0);
        let b = base.derive(1);
        assert_ne!(a, b);
        assert_ne!(a, base);
        // deterministic
        assert_eq!(a, RngSeed::new(42).derive(0));
    }
}
