//! Seeded random streams. Each stochastic process draws from its own stream
//! so switching one off leaves the others' draws unchanged.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Limits = 1,
    Cancels = 2,
    MarketArrivals = 3,
    Flow = 4,
    Fraction = 5,
    Pilot = 6,
    Noise = 7,
    Grid = 8,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
