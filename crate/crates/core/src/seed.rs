//! Deterministic seed derivation.
//!
//! A single run seed fans out into independent streams, one per named unit of
//! work (a pipeline stage, a tree index, a CV fold). Deriving instead of
//! sharing one RNG keeps every unit reproducible on its own and makes
//! parallel execution bit-identical to sequential execution.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over the base seed and a label. Stable across platforms and builds.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    const OFFSET: u64 = 0xcbf29ce484222325;
    const PRIME: u64 = 0x100000001b3;
    let mut hash = OFFSET;
    for byte in base.to_le_bytes().iter().chain(label.as_bytes()) {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(PRIME);
    }
    // One splitmix64 round so labels differing in a single bit decorrelate.
    let mut z = hash.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// RNG for the unit of work identified by `label`.
pub fn stream(base: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, label))
}

/// Standard normal draw via Box-Muller on two uniform variates.
pub fn standard_normal<R: rand::Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1], keeps ln finite
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
