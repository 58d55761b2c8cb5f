//! Independent random streams derived from one root seed.
//!
//! Every consumer of randomness asks for its own ChaCha stream keyed by a
//! purpose tag and an index, so adding users, elements or antennas never
//! shifts the draws of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Placement = 1,
    /// One stream per RIS element row of the BS–RIS matrix.
    BsRisRow = 2,
    /// One stream per user for the RIS–user vector.
    RisUser = 3,
    Pairing = 4,
    OrderRandomization = 5,
    RandomPhase = 6,
    BeamRandomization = 7,
    PhaseRandomization = 8,
}

pub fn stream(root: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(((purpose as u64) << 48) ^ index);
    rng
}

/// SplitMix64 finalizer; used to derive child roots such as
/// `(root, grid point, seed index)`.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(root: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(root), |acc, &p| mix(acc ^ mix(p)))
}
