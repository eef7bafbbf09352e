//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by the
//! user seed. Independent consumers (restarts, folds, generator sizes) take
//! distinct stream ids, so results do not depend on the order or the thread
//! in which those consumers run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for; keeps stream ids of different consumers apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Init = 1,
    Folds = 2,
    Negatives = 3,
    Hyperedges = 4,
    Attributes = 5,
    Planted = 6,
    Deletion = 7,
}

pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) | (index & ((1 << 48) - 1)));
    rng
}
