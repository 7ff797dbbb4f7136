//! Explicit seed plumbing. Every random draw in the crate comes from a
//! generator built here; there is no global RNG state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::Scalar;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `stream`, item `counter` under `seed`.
pub fn derive_seed(seed: u64, stream: u64, counter: u64) -> u64 {
    mix(mix(seed ^ mix(stream)).wrapping_add(counter))
}

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Named sub-streams so independent consumers of one master seed never
/// share draws.
pub mod stream {
    pub const SCENARIO: u64 = 1;
    pub const CHANNEL: u64 = 2;
    pub const EXPLORE: u64 = 3;
    pub const REWARD: u64 = 4;
    pub const BATCH: u64 = 5;
    pub const ACTOR: u64 = 6;
    pub const EVAL: u64 = 7;
    pub const INIT: u64 = 8;
    pub const MC_SAMPLE: u64 = 9;
}

pub fn normal<T: Scalar>(rng: &mut Rng) -> T {
    let x: f64 = StandardNormal.sample(rng);
    T::of(x)
}

pub fn normal_vec<T: Scalar>(rng: &mut Rng, n: usize) -> Vec<T> {
    (0..n).map(|_| normal(rng)).collect()
}
