//! Seeded RNG streams.
//!
//! Every Monte Carlo consumer derives its generator from a master seed plus a
//! stream index, so trials can run in any order (or in parallel) and still
//! reproduce bit-identically.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG used throughout the crate.
pub type Rng = ChaCha8Rng;

/// Generator for stream `stream` of master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
