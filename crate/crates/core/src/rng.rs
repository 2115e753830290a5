//! Seed derivation. Every random stream in the crate is a `ChaCha8Rng` seeded
//! from an explicit base seed plus a path of stream labels.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

pub type Rng = ChaCha8Rng;

/// Stream labels used when deriving child seeds.
pub mod stream {
    pub const MODEL_INIT: u64 = 1;
    pub const VALIDATION_SPLIT: u64 = 2;
    pub const PRUNE: u64 = 3;
    pub const CLIENT: u64 = 4;
    pub const ROUND: u64 = 5;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `parts` into `base`, order-sensitively.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// One standard-normal draw.
pub fn gauss(rng: &mut impl rand::Rng) -> f64 {
    rand_distr::StandardNormal.sample(rng)
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
