//! Seed derivation and random number streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] seeded with a
//! 64-bit value derived from a master seed and a path of integer labels
//! (trial index, purpose tag, generation, member index ...). Derivation folds
//! each label into the state with the SplitMix64 finalizer, so sibling streams
//! are statistically independent and a stream never depends on how many draws
//! another stream consumed.
//!
//! Gaussian samples use `rand_distr::StandardNormal`, which implements the
//! Ziggurat method.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Purpose tags used to separate the streams of one trial.
pub mod tag {
    pub const CHANNEL: u64 = 1;
    pub const INPUT: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const DE: u64 = 4;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a path of labels.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(seed), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

pub fn stream(seed: u64, labels: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, labels))
}
