//! Deterministic random streams.
//!
//! Every consumer of randomness derives its own ChaCha stream from the master
//! seed plus a small tuple of coordinates (purpose, generation, index). Draws
//! made by one individual therefore never depend on how many draws another
//! individual made, or on which thread evaluated it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a seed with a list of coordinates into a new 64-bit seed.
pub fn derive_seed(seed: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(seed), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

/// Tagged substream.
pub fn stream(seed: u64, tag: &str, coords: &[u64]) -> StreamRng {
    let tag_hash = tag
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    let mut all = Vec::with_capacity(coords.len() + 1);
    all.push(tag_hash);
    all.extend_from_slice(coords);
    StreamRng::seed_from_u64(derive_seed(seed, &all))
}
