//! Named, independently seeded random streams.
//!
//! Every consumer (Alice, Bob, the harness) gets its own ChaCha stream derived
//! from the master seed and the trial index, so a trial's randomness does not
//! depend on how trials are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Alice = 0,
    Bob = 1,
    Harness = 2,
}

/// The stream for `consumer` in trial `trial` of a run seeded with `master`.
pub fn stream(master: u64, trial: u64, consumer: Stream) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream((trial << 2) | consumer as u64);
    rng
}
