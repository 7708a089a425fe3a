//! Seed streams.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] seeded from a master
//! seed and a path of stream indices, so trials and sub-tasks can run in any
//! order (or in parallel) and still draw exactly the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream indices used inside one Monte-Carlo trial or estimate run.
pub mod stream {
    pub const TRAINING_DATA: u64 = 1;
    pub const BOOTSTRAP: u64 = 2;
    pub const PSEUDO_TEST: u64 = 3;
    pub const SUPPLEMENT_CASE: u64 = 4;
    pub const SUPPLEMENT_PAIR: u64 = 5;
    pub const FOLDS: u64 = 6;
    pub const INFLUENCE_BOOTSTRAP: u64 = 7;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a stream index.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ splitmix64(index.wrapping_add(0x632)))
}

/// Derives a seed by walking a path of stream indices.
pub fn derive_path(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(parent, |seed, &i| derive_seed(seed, i))
}

pub fn rng_from_seed(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream_rng(parent: u64, path: &[u64]) -> StreamRng {
    rng_from_seed(derive_path(parent, path))
}
