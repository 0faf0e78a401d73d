//! Seedable random streams.
//!
//! A run seeded with `seed` uses three independent ChaCha8 streams that share
//! the key derived from `seed` and differ in their stream id:
//!
//! | stream id | consumer                      |
//! |-----------|-------------------------------|
//! | 0         | initial particle positions    |
//! | 1         | particle batch draws          |
//! | 2         | data-mini-batch draws         |
//!
//! Consuming more numbers from one stream never shifts another, so changing
//! the batch size does not change the initial ensemble, and a minibatch
//! target sees the same data batches whatever particle method is used.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub const INIT_STREAM: u64 = 0;
pub const BATCH_STREAM: u64 = 1;
pub const DATA_STREAM: u64 = 2;

pub fn stream(seed: u64, id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone)]
pub struct RunStreams {
    pub init: StreamRng,
    pub batches: StreamRng,
    pub data: StreamRng,
}

impl RunStreams {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            init: stream(seed, INIT_STREAM),
            batches: stream(seed, BATCH_STREAM),
            data: stream(seed, DATA_STREAM),
        }
    }
}
