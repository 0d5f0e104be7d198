//! Counter-based random streams.
//!
//! Every Monte Carlo loop in the crate draws trial `t` from its own ChaCha8
//! stream keyed by `(seed, t)`. ChaCha is specified bit-for-bit, so results do
//! not depend on the platform, the thread count, or the order in which trials
//! are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream index reserved for draws that are shared by all trials of a run.
pub const SHARED_STREAM: u64 = u64::MAX;

pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
