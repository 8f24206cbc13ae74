//! Deterministic derivation of independent random streams.
//!
//! Every random stream in an experiment (splits, forests, trees, the sigma
//! search) is keyed by the master seed plus a path of integer tags, so runs
//! can execute in any order or concurrently and still reproduce bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const TAG_SPLIT: u64 = 1;
pub const TAG_FOREST: u64 = 2;
pub const TAG_POOL: u64 = 3;
pub const TAG_TREE: u64 = 4;
pub const TAG_SIGMA: u64 = 5;
pub const TAG_FRIEDMAN: u64 = 6;
pub const TAG_FOLDS: u64 = 7;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `tags` into `master`, producing a new 64-bit seed.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(master), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng_from(master: u64, tags: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(master, tags))
}
