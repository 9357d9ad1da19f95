//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit `u64` seed and builds a
//! ChaCha stream from it, so results depend only on the seed and not on the
//! platform or thread schedule. Sub-streams for shards or seeds are derived
//! with [`substream`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}
