//! Seed plumbing.
//!
//! Experiments fan out into several RNG streams (graph construction, arm
//! sampling, per-policy noise, per-round transmission draws). Every stream
//! seed is derived from a base seed and a stream tag with [`derive_seed`],
//! so a single `u64` pins the whole run and workers never share state.

use rand::Rng;

/// SplitMix64-style mix of a base seed and a stream tag. Deterministic,
/// stateless, and well spread even for small consecutive tags.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fisher-Yates on a slice. `SliceRandom::shuffle` would do the same; spelled
/// out so the draw order is pinned by this crate, not a dependency detail.
pub(crate) fn shuffle<T, R: Rng + ?Sized>(xs: &mut [T], rng: &mut R) {
    for i in (1..xs.len()).rev() {
        let j = rng.gen_range(0..=i);
        xs.swap(i, j);
    }
}
