//! Independent random streams derived from a master seed and a key path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const DATASET_CLASS: u64 = 1;
pub(crate) const DATASET_OBJECT: u64 = 2;
pub(crate) const EXTRACTOR: u64 = 3;
pub(crate) const CODEBOOK: u64 = 4;
pub(crate) const CHANNEL: u64 = 5;
pub(crate) const SELECTION: u64 = 6;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn derive_seed(seed: u64, key: &[u64]) -> u64 {
    key.iter()
        .fold(splitmix(seed), |acc, &k| splitmix(acc ^ splitmix(k)))
}

pub(crate) fn stream(seed: u64, key: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, key))
}
