//! Seeded random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream keyed by a master
//! seed and a 64-bit stream index. Replicate `i` of a campaign always uses
//! stream `i`, so results do not depend on how replicates are scheduled
//! across threads. Distinct campaigns sharing a master seed are separated
//! with [`RngSeed::derive`], which remixes the seed with a label.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    /// Same key, different stream.
    pub fn stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    /// A new key for an independent family of streams.
    pub fn derive(self, label: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(label.wrapping_add(0x9e37_79b9_7f4a_7c15))),
            stream: 0,
        }
    }

    pub fn into_state(self) -> RngState {
        RngState::new(self)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator owned by one execution strand.
#[derive(Debug, Clone)]
pub struct RngState {
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: RngSeed) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed.seed);
        inner.set_stream(seed.stream);
        Self { inner }
    }
}

impl RngCore for RngState {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
