//! Counter-based stream splitting.
//!
//! One ChaCha8 key per master seed; the replicate index selects the stream and
//! each component of a replicate owns a disjoint `2^48`-word block of it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Arrival times of macroscopic clusters.
pub const SCHEDULE: u64 = 0;
/// Rounding and evolution of the initial measure.
pub const INITIAL: u64 = 1;
/// The infinitesimal immigrant stream.
pub const STREAM: u64 = 2;

/// Stream of the `k`-th macroscopic cluster of a replicate.
pub fn cluster(k: usize) -> u64 {
    3 + k as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReplicateSeed {
    pub master: u64,
    pub replicate: u64,
}

impl ReplicateSeed {
    pub fn new(master: u64, replicate: u64) -> Self {
        Self { master, replicate }
    }

    pub fn rng(&self, component: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.replicate);
        rng.set_word_pos((component as u128) << 48);
        rng
    }
}
