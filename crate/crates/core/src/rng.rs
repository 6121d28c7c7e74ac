//! Seeded random streams.
//!
//! Every consumer of randomness (scene generator, each PE, the ring
//! coordinator) owns a ChaCha stream derived from a base seed and a stream id,
//! so runs are bitwise reproducible regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream ids below this value are PE streams; the named streams sit above.
pub const NAMED_STREAM_BASE: u64 = 1 << 40;
pub const COORDINATOR_STREAM: u64 = NAMED_STREAM_BASE;
pub const SCENE_STREAM: u64 = NAMED_STREAM_BASE + 1;
pub const INIT_STREAM: u64 = NAMED_STREAM_BASE + 2;

pub fn stream(seed: u64, stream_id: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Stream owned by PE `pe`.
pub fn pe_stream(seed: u64, pe: usize) -> SimRng {
    stream(seed, pe as u64)
}

/// Mixes a base seed with a replicate index (splitmix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
