//! Deterministic random streams.
//!
//! Every trial gets its own ChaCha stream keyed by `(master_seed, index)`,
//! so results never depend on the order in which trials are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream index reserved for sampling database contents.
pub const DATABASE_STREAM: u64 = u64::MAX;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `index` under `master_seed`.
pub fn stream(master_seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}
