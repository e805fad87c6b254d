//! Seeded, stream-splittable random number generation.
//!
//! Each parallel unit of work owns one ChaCha stream derived from a run seed
//! and its index, so parallel runs are reproducible regardless of
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
