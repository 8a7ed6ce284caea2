//! Stable seed derivation.
//!
//! Every random stream in a run is keyed by a path of indices below the
//! master seed (cell, iteration, subset, purpose). Each step folds one index
//! into the running state with the SplitMix64 finalizer, so a stream's seed
//! depends only on its path and never on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed type used throughout the crate.
pub type Seed = u64;

/// Stream purposes below a subset seed.
pub const STREAM_QUALITY: u64 = 1;
pub const STREAM_CITATIONS: u64 = 2;
pub const STREAM_JITTER: u64 = 3;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `parent` and one index.
pub fn derive(parent: Seed, index: u64) -> Seed {
    splitmix64(
        parent
            .wrapping_add(GOLDEN)
            .wrapping_add(splitmix64(index.wrapping_add(GOLDEN))),
    )
}

/// Derive along a path of indices, e.g. `[cell, iteration, subset]`.
pub fn derive_path(master: Seed, path: &[u64]) -> Seed {
    path.iter().fold(master, |s, &i| derive(s, i))
}

pub fn rng(seed: Seed) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
