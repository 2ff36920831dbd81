//! Seeded, splittable random streams.
//!
//! Every consumer (weight init, per-epoch shuffling, per-step dropout, data
//! splitting) draws from its own ChaCha stream derived from the run seed and
//! a purpose/counter pair, so results do not depend on call order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init,
    Shuffle { epoch: u64 },
    Dropout { step: u64 },
    Split,
    Synthetic { index: u64 },
}

impl Stream {
    fn id(self) -> u64 {
        const SHIFT: u32 = 56;
        match self {
            Stream::Init => 1 << SHIFT,
            Stream::Shuffle { epoch } => (2 << SHIFT) | (epoch & ((1 << SHIFT) - 1)),
            Stream::Dropout { step } => (3 << SHIFT) | (step & ((1 << SHIFT) - 1)),
            Stream::Split => 4 << SHIFT,
            Stream::Synthetic { index } => (5 << SHIFT) | (index & ((1 << SHIFT) - 1)),
        }
    }
}

/// Independent generator for `(seed, stream)`.
pub fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
