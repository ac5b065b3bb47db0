//! Seed derivation for reproducible Monte Carlo.
//!
//! One master seed feeds every experiment. Each trial owns an independent
//! ChaCha stream selected by `(seed, domain, index)`, so the draws of a trial
//! never depend on how trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains keep unrelated experiments on disjoint key material.
pub mod domain {
    pub const CODING: u64 = 1;
    pub const WARDEN: u64 = 2;
    pub const INFO_DENSITY: u64 = 3;
    pub const INPUT: u64 = 4;
    pub const MESSAGE: u64 = 5;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// The RNG for trial `index` of an experiment seeded with `seed`.
pub fn trial_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ splitmix64(domain));
    rng.set_stream(index);
    rng
}
