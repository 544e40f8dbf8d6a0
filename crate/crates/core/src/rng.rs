//! Reproducible randomness.
//!
//! Every random procedure takes a [`Seed`]. The generator behind it is
//! ChaCha8 (`rand_chacha::ChaCha8Rng`): a 64-bit seed selects the key and
//! [`Seed::stream`] selects one of 2^64 independent streams, so parallel
//! work items draw from disjoint deterministic sequences regardless of
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    pub fn new(value: u64) -> Self {
        Seed(value)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// Generator on stream 0.
    pub fn rng(self) -> Rng {
        self.stream(0)
    }

    /// Generator on stream `index`; streams never overlap for a fixed seed.
    pub fn stream(self, index: u64) -> Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(index);
        rng
    }

    /// Derive a child seed, for handing a whole sub-experiment its own key.
    pub fn derive(self, tag: u64) -> Seed {
        // splitmix64 finalizer
        let mut z = self.0 ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        Seed(z ^ (z >> 31))
    }
}

impl From<u64> for Seed {
    fn from(value: u64) -> Self {
        Seed(value)
    }
}
