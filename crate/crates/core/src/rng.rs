//! Reproducible per-walker random streams.
//!
//! A campaign seed keys one ChaCha8 generator; walker `i` draws from stream
//! `i` of that key, so results never depend on how walkers are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        Self { seed, stream_index }
    }

    pub fn generator(&self) -> ChaCha8Rng {
        StreamFamily::new(self.seed).stream(self.stream_index)
    }
}

/// All streams of one seed; cloning the keyed generator is cheaper than re-keying per walker.
#[derive(Clone, Debug)]
pub struct StreamFamily {
    keyed: ChaCha8Rng,
}

impl StreamFamily {
    pub fn new(seed: u64) -> Self {
        Self {
            keyed: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    #[inline]
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = self.keyed.clone();
        rng.set_stream(index);
        rng
    }
}

/// SplitMix64 finalizer, used to derive independent sub-seeds from a base seed and a tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
