//! Per-path random streams.
//!
//! Path `i` of a run with seed `s` draws from ChaCha8 keyed by `s` on stream
//! `i`, so every path owns an independent, position-addressable stream and
//! the output never depends on how paths are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifier persisted in sample metadata.
pub const RNG_ALGORITHM: &str = "chacha8-seed-stream-v1";

pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// Seed for the `index`-th checkpoint of an experiment.
pub fn checkpoint_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(1)))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
