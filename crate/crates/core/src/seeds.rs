//! Stable seed derivation.
//!
//! Every random stream in the pipeline is seeded from the master seed and a
//! path of integers (market index, period index, stream tag, replicate).
//! The derivation folds each path element into a SplitMix64 state, so the
//! seed of a work unit never depends on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags used by the pipeline.
pub mod stream {
    pub const BOOTSTRAP: u64 = 1;
    pub const SURROGATE: u64 = 2;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
