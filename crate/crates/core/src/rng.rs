//! Per-purpose random streams derived from one master seed.
//!
//! Every consumer of randomness (dataset rendering, epoch ordering,
//! augmentation, weight init) gets its own stream keyed by a fixed label and
//! a coordinate tuple, so switching one mechanism off never shifts the draws
//! seen by another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Dataset = 1,
    Order = 2,
    Augment = 3,
    Init = 4,
    Eval = 5,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a master seed with a purpose label and coordinates into a 64-bit key.
pub fn derive_seed(master: u64, purpose: Purpose, coords: &[u64]) -> u64 {
    let mut h = splitmix(master ^ (purpose as u64).wrapping_mul(0xA076_1D64_78BD_642F));
    for &c in coords {
        h = splitmix(h ^ c);
    }
    h
}

pub fn stream(master: u64, purpose: Purpose, coords: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, purpose, coords))
}
