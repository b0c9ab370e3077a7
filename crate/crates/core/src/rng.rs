//! Seedable random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 generator keyed
//! by an experiment seed and a 64-bit stream id. Work items (a window, a
//! trial block, a sample) own their streams, so results never depend on which
//! worker thread picks an item up.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

/// Purpose of a stream belonging to a work item.
pub mod lanes {
    pub const WINDOW: u64 = 0;
    pub const FIBER: u64 = 1;
    pub const PATTERN: u64 = 2;
    pub const START: u64 = 3;
}

/// Stream `id` of the generator seeded by `seed`. Id 0 is the experiment-level
/// base stream.
pub fn stream(seed: u64, id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Stream for lane `lane` of work item `item`.
pub fn item_stream(seed: u64, item: u64, lane: u64) -> StreamRng {
    debug_assert!(lane < 256);
    stream(seed, ((item + 1) << 8) | lane)
}
