//! Seeded random streams.
//!
//! Every stochastic stage of a run draws from its own ChaCha stream whose seed
//! is derived from the run seed and a stage tag, so stages never share state
//! and the schedule of a sweep cannot change any individual result.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stage tags used with [`derive_seed`].
pub mod stage {
    pub const DATA: u64 = 1;
    pub const INIT: u64 = 2;
    pub const FUNCTION_SET: u64 = 3;
    pub const LSTD: u64 = 4;
}

/// SplitMix64 finalizer over `(seed, tag)`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, tag: u64) -> Rng {
    seeded(derive_seed(seed, tag))
}
