//! Counter-based seed derivation.
//!
//! Every random stream in the crate is keyed by a path of integers below a
//! master seed (for example `[tree, feature]`). Streams never share state,
//! so work can be split across threads in any order and still reproduce the
//! serial result bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags used by the drivers and the harness.
pub mod tag {
    pub const SPLIT: u64 = 0x5350_4c49;
    pub const SHADOW: u64 = 0x5348_4144;
    pub const FOREST: u64 = 0x464f_5245;
    pub const IMPORTANCE: u64 = 0x494d_504f;
    pub const MLP: u64 = 0x4d4c_5050;
    pub const PERTURB: u64 = 0x5045_5254;
    pub const ITERATION: u64 = 0x4954_4552;
    pub const EVAL: u64 = 0x4556_414c;
    pub const BORUTA: u64 = 0x424f_5255;
    pub const NOISE_BORUTA: u64 = 0x4e42_4f52;
    pub const SYNTH: u64 = 0x5359_4e54;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a counter path.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(seed), |acc, &counter| {
        splitmix64(acc ^ splitmix64(counter.wrapping_add(0x632b_e59b_d9b4_e019)))
    })
}

/// A ChaCha8 generator for the stream at `path` below `seed`.
pub fn rng(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, path))
}
