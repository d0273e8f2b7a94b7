//! Seeded random streams.
//!
//! Every trial draws from its own ChaCha stream whose seed is a hash of the
//! master seed and the trial's coordinates, so results do not depend on the
//! order in which trials are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `master` with a path of indices (e.g. sweep point, trial).
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &i| {
        splitmix64(acc ^ splitmix64(i))
    })
}

pub fn stream(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
