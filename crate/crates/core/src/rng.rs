//! Seeded random streams.
//!
//! Every source of randomness in a run derives from one seed. Each stage draws
//! from its own ChaCha stream so that changing how much one stage consumes
//! never shifts another stage's numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Named substreams of the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Merge = 1,
    Split = 2,
    KgeInit = 3,
    KgeSampling = 4,
    MlpInit = 5,
    Folds = 6,
    Synthetic = 7,
}

pub fn stream(seed: u64, which: Stream) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
