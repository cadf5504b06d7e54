//! Deterministic counter-based RNG streams.
//!
//! Every random consumer derives its own ChaCha stream from `(seed, domain, index)`.
//! Streams with different coordinates never overlap, so results do not depend on
//! evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Well-known stream domains.
pub mod domain {
    pub const TRAIN_DATA: u64 = 1;
    pub const TEST_DATA: u64 = 2;
    pub const INIT: u64 = 3;
    pub const TRAIN_NOISE: u64 = 4;
    pub const EVAL: u64 = 5;
    pub const FLOW: u64 = 6;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for `(seed, domain, index)`.
pub fn stream(seed: u64, domain: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(domain)));
    rng.set_stream(index);
    rng
}

/// Derive a child seed from a parent seed and a label.
pub fn child_seed(seed: u64, label: u64) -> u64 {
    splitmix64(seed.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ splitmix64(label))
}

/// Draw a fresh seed from an existing generator (used to hand sub-computations
/// their own stream family).
pub fn fork(rng: &mut impl rand::Rng) -> u64 {
    rng.random::<u64>()
}
