//! Reproducible random streams.
//!
//! Every random quantity comes from a ChaCha8 generator keyed by the user
//! seed, with the 64-bit stream selector derived from the task:
//!
//! * an MCMC chain uses `stream = chain_id`;
//! * risk replication `rep` at grid index `g` uses `stream = (g << 32) | rep`.
//!
//! Streams are independent keystreams of the same key, so results do not
//! depend on how tasks are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream selector for replication `rep` at grid index `grid_idx`.
pub fn replication_stream(grid_idx: usize, rep: usize) -> u64 {
    debug_assert!(rep < (1 << 32));
    ((grid_idx as u64) << 32) | rep as u64
}
