//! Seeded random streams.
//!
//! Every stochastic operation takes a 64-bit seed and draws from a ChaCha8
//! generator. Independent sub-streams of one seed are selected with the
//! generator's stream counter, so a `(seed, stream)` pair always yields the
//! same sequence regardless of what else ran before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids for the sub-processes drawn from one seed.
pub mod stream {
    pub const PAIRS: u64 = 1;
    pub const TRIGGER_BACKGROUND: u64 = 2;
    pub const SIGNAL_BACKGROUND: u64 = 3;
    pub const BEAM_SPLITTER: u64 = 4;
    pub const MEMORY_LOSS: u64 = 5;
    pub const MEMORY_NOISE: u64 = 6;
    pub const PROJECTION: u64 = 7;
    pub const FRINGE: u64 = 8;
}

pub fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes an index into a seed (splitmix64 finalizer). Used for per-setting
/// seeds, e.g. one per storage time of a sweep.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
