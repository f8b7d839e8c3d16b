//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit generator. Independent
//! replicates use [`replicate_rng`]: a ChaCha8 generator keyed by the base
//! seed with the replicate index as its stream number, so replicate `i`
//! draws the same numbers regardless of how many other replicates run or in
//! which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for replicate `index` of an experiment with base seed `base`.
pub fn replicate_rng(base: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index);
    rng
}
