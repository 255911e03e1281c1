//! Seeded substreams.
//!
//! Trial `i` of a run seeded with `seed` draws from ChaCha8 keyed by `seed`
//! on stream `i`, so trials can run in any order or in parallel and still
//! see the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
