//! Seeded random streams.
//!
//! All randomness in the crate comes from ChaCha8 (`rand_chacha::ChaCha8Rng`),
//! a portable counter-based generator whose output is identical on every
//! platform. Independent work items (bootstrap replicates, nMDS restarts) each
//! get their own stream of the same key, so results do not depend on the order
//! in which parallel workers run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for the main sequence of `seed`.
pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for work item `index` derived from `seed`.
///
/// Stream 0 is reserved for [`seeded`]; item `i` uses stream `i + 1`.
pub fn stream(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}
