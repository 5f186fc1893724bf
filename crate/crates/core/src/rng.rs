//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha20 generator keyed by
//! `ChaCha20Rng::seed_from_u64(seed)` and positioned on an explicit stream id.
//! Distinct stream ids of one seed are independent, so callers that sample in
//! parallel hand each worker its own id.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

/// Stream `id` of `seed`.
pub fn stream(seed: u64, id: u64) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Derives a child stream id from a parent id and a component index, keeping
/// nested constructions on disjoint streams.
pub fn child_id(parent: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = parent
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw on the open interval (0, 1).
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

pub fn fair_bit<R: RngCore + ?Sized>(rng: &mut R) -> bool {
    rng.next_u64() >> 63 == 1
}
