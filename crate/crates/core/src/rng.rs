//! Seed handling. Every random draw in the crate comes from a [`SeedStream`]
//! derived from one root seed, so sub-experiments (data, init, masks, trials)
//! can be reproduced independently of each other.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Named-stream seed splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream {
    seed: u64,
}

impl SeedStream {
    pub fn new(root: u64) -> Self {
        Self { seed: root }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream keyed by a name, e.g. `"data"`, `"init"`, `"masks"`.
    pub fn named(&self, name: &str) -> SeedStream {
        SeedStream {
            seed: splitmix64(self.seed ^ splitmix64(fnv1a(name.as_bytes()))),
        }
    }

    /// Child stream keyed by an index, e.g. a trial number.
    pub fn indexed(&self, index: u64) -> SeedStream {
        SeedStream {
            seed: splitmix64(splitmix64(self.seed).wrapping_add(index)),
        }
    }

    pub fn rng(&self) -> Rng {
        Rng::seed_from_u64(self.seed)
    }
}
