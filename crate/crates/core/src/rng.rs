//! Seed derivation. Every random consumer gets its own generator derived from
//! the run seed and a fixed salt so that adding draws in one place never
//! shifts the stream of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const SALT_MODEL_INIT: u64 = 1;
pub(crate) const SALT_EMBED_INIT: u64 = 2;
pub(crate) const SALT_CORPUS_DRAWS: u64 = 3;
pub(crate) const SALT_UTTERANCE_DRAWS: u64 = 4;
pub(crate) const SALT_SPLIT: u64 = 5;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn derive_seed(seed: u64, salt: u64) -> u64 {
    splitmix64(seed ^ splitmix64(salt))
}

pub(crate) fn derived_rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, salt))
}
