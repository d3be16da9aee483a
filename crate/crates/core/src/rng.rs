//! Every random draw in a run derives from one seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xxhash_rust::xxh3::xxh3_64_with_seed;

pub type RunRng = ChaCha8Rng;

/// Independent generator for a named consumer of the run seed.
pub fn stream(seed: u64, name: &str) -> RunRng {
    ChaCha8Rng::seed_from_u64(xxh3_64_with_seed(name.as_bytes(), seed))
}
