//! Counter-based random streams.
//!
//! Every stochastic step draws from a generator keyed by `(master seed,
//! purpose, indices…)`, so results do not depend on scheduling or thread
//! count.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type StreamRng = Xoshiro256PlusPlus;

/// Purposes that keep streams with equal indices apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Propagate = 0x5052_4f50,
    Resample = 0x5245_5341,
    Simulate = 0x5349_4d55,
    Replicate = 0x5245_504c,
    Chain = 0x4348_4149,
    Likelihood = 0x4c49_4b45,
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a seed and a list of indices into one 64-bit key.
#[inline]
pub fn derive_seed(seed: u64, purpose: Purpose, indices: &[u64]) -> u64 {
    let mut h = splitmix(seed ^ purpose as u64);
    for &i in indices {
        h = splitmix(h ^ i);
    }
    h
}

#[inline]
pub fn stream(seed: u64, purpose: Purpose, indices: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, purpose, indices))
}
