//! Deterministic seed derivation.
//!
//! Every stochastic component receives its own stream, derived from a master
//! seed and a path of integer labels. The rule is: start from the master seed,
//! and for each label `x` set `state = splitmix64(state ^ splitmix64(x + 1))`.
//! The same master seed and path always yield the same child seed, on every
//! platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random number generator used everywhere in the crate.
pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a label path.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |state, &label| {
            splitmix64(state ^ splitmix64(label.wrapping_add(1)))
        })
}

/// Builds a generator seeded from `master` and a label path.
pub fn rng_from(master: u64, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(master, path))
}
