//! Seeded random streams.
//!
//! Every stochastic decision in a search draws from a substream keyed by the
//! run seed and its position in the loop (iteration/depth, particle/ant), so
//! the draw order does not depend on how evaluations are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SearchRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a path of indices into a single 64-bit key.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn substream(seed: u64, path: &[u64]) -> SearchRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

/// Stream tags so PSO and ACO loops never share a substream by accident.
pub(crate) mod tag {
    pub const INIT: u64 = 1;
    pub const MOVE: u64 = 2;
    pub const EVAL: u64 = 3;
    pub const WALK: u64 = 4;
}
