//! Seeded random streams.
//!
//! Every random decision in the pipeline draws from a ChaCha8 generator keyed
//! by the run seed and a named stream, so components can be re-run in
//! isolation and still see the same draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Mining = 1,
    Negatives = 2,
    Init = 3,
    QueryGen = 4,
    Batches = 5,
    GradCheck = 6,
}

pub fn stream(seed: u64, which: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
