//! Deterministic random streams.
//!
//! Every random draw comes from a stream keyed by the master seed and a path of integer
//! labels (iteration, sweep, file, record, ...). Work split across threads draws from the
//! same streams in any schedule, so results do not depend on the thread count.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type StreamRng = Xoshiro256PlusPlus;

/// Labels separating the purposes a stream can serve.
pub mod purpose {
    pub const INIT: u64 = 1;
    pub const TRUTH_A: u64 = 2;
    pub const TRUTH_B: u64 = 3;
    pub const TRUTH_LINKED: u64 = 4;
    pub const LINKAGE: u64 = 5;
    pub const POSTERIOR: u64 = 6;
    pub const SIMULATE: u64 = 7;
    pub const DISTORT: u64 = 8;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed key for the stream at `path` below `seed`.
#[inline]
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}

/// Generator for the stream at `path` below `seed`.
#[inline]
pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive(seed, path))
}
