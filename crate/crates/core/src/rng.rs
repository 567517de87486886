//! Deterministic stream derivation.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by
//! `(seed, domain)` and positioned on a stream `index`. Chunks of a Monte-Carlo
//! run use their chunk number as the stream, so the values produced for chunk
//! `c` never depend on how many chunks ran before it or on which thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags separating independent uses of one user seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Input = 0x1,
    Weights = 0x2,
    UnitSamples = 0x3,
    Covariance = 0x4,
    Pooling = 0x5,
    Synthetic = 0x6,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a child key into a seed; used to give sub-experiments their own seed.
pub fn derive_seed(seed: u64, key: u64) -> u64 {
    let mut s = seed ^ key.rotate_left(32);
    splitmix64(&mut s);
    splitmix64(&mut s)
}

/// Generator for stream `index` of `(seed, domain)`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut state = seed ^ (domain as u64).wrapping_mul(0xd1b5_4a32_d192_ed03);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
