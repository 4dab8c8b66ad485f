//! Counter-based random substreams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream selected by
//! `(seed, stream id)`. Users, channels and replications get disjoint stream
//! ids, so results do not depend on evaluation order or thread count.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Opens the stream `stream` of the generator keyed by `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives an independent child seed; used to key nested experiment levels.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    substream(seed, stream).next_u64()
}

/// Privatization channel of a single user.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Label = 0,
    Indicator = 1,
    Feature = 2,
}

const CHANNELS: u64 = 4;

/// Seed handle for one user's privatization channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserStreams {
    pub seed: u64,
    pub user: u64,
}

impl UserStreams {
    pub fn new(seed: u64, user: usize) -> Self {
        Self {
            seed,
            user: user as u64,
        }
    }

    pub fn channel(&self, channel: Channel) -> ChaCha8Rng {
        substream(self.seed, self.user * CHANNELS + channel as u64)
    }
}
