//! Seeded random streams.
//!
//! Every consumer derives its generator from a 64-bit seed plus a fixed
//! stream id, so no two purposes ever share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_GENERATION: u64 = 1;
pub const STREAM_PERMUTATION: u64 = 2;
pub const STREAM_BINOMIAL: u64 = 3;
pub const STREAM_SUBSET: u64 = 4;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
