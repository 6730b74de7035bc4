//! Deterministic, splittable seeding.
//!
//! Every randomized routine takes a [`Seed`] and derives per-item sub-seeds
//! from `(seed, index)`, so results never depend on evaluation order or thread
//! count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Root of a deterministic pseudo-random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

/// The generator behind every [`Seed::stream`].
pub type SeedStream = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Seed {
    /// Independent child seed for work item `index`.
    pub fn derive(self, index: u64) -> Seed {
        Seed(splitmix64(splitmix64(self.0) ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019))))
    }

    /// Child seed keyed by a string tag, for separating pipeline stages.
    pub fn derive_tag(self, tag: &str) -> Seed {
        let h = tag
            .bytes()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
        self.derive(h)
    }

    pub fn stream(self) -> SeedStream {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Counter-based uniform draw in `[0, 1)` for item `index`.
    #[inline]
    pub fn uniform_at(self, index: u64) -> f64 {
        let bits = splitmix64(splitmix64(self.0 ^ 0xd1b5_4a32_d192_ed03) ^ splitmix64(index));
        (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}
