//! RGB shuffle and probability-gated application.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::image::Image;

/// Bijection on the three color channels: output channel `c` reads input
/// channel `perm[c]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChannelPermutation([u8; 3]);

impl ChannelPermutation {
    pub const IDENTITY: ChannelPermutation = ChannelPermutation([0, 1, 2]);

    /// All six permutations, identity first.
    pub const ALL: [ChannelPermutation; 6] = [
        ChannelPermutation([0, 1, 2]),
        ChannelPermutation([0, 2, 1]),
        ChannelPermutation([1, 0, 2]),
        ChannelPermutation([1, 2, 0]),
        ChannelPermutation([2, 0, 1]),
        ChannelPermutation([2, 1, 0]),
    ];

    pub fn new(perm: [u8; 3]) -> Result<Self> {
        let mut seen = [false; 3];
        for &p in &perm {
            if p > 2 || seen[p as usize] {
                return Err(Error::invalid(format!("{perm:?} is not a permutation of 0..3")));
            }
            seen[p as usize] = true;
        }
        Ok(ChannelPermutation(perm))
    }

    pub fn non_identity() -> &'static [ChannelPermutation] {
        &Self::ALL[1..]
    }

    pub fn as_array(self) -> [u8; 3] {
        self.0
    }

    pub fn is_identity(self) -> bool {
        self == Self::IDENTITY
    }

    /// `(self ∘ other)`: shuffling by `other` then by `self` equals shuffling by
    /// the result.
    pub fn compose(self, other: ChannelPermutation) -> ChannelPermutation {
        // out[c] = mid[self[c]] = in[other[self[c]]]
        ChannelPermutation([other.0[self.0[0] as usize], other.0[self.0[1] as usize], other.0[self.0[2] as usize]])
    }

    pub fn inverse(self) -> ChannelPermutation {
        let mut inv = [0u8; 3];
        for (c, &p) in self.0.iter().enumerate() {
            inv[p as usize] = c as u8;
        }
        ChannelPermutation(inv)
    }
}

impl fmt::Display for ChannelPermutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const NAMES: [char; 3] = ['R', 'G', 'B'];
        for &p in &self.0 {
            write!(f, "{}", NAMES[p as usize])?;
        }
        Ok(())
    }
}

/// Permute the channels of a 3-channel image.
pub fn rgb_shuffle(image: &Image, perm: ChannelPermutation) -> Result<Image> {
    if image.channels() != 3 {
        return Err(Error::shape("rgb_shuffle", "3 channels", image.channels()));
    }
    let mut out = image.clone();
    if perm.is_identity() {
        return Ok(out);
    }
    let p = perm.as_array();
    for (dst, src) in out.data_mut().chunks_exact_mut(3).zip(image.data().chunks_exact(3)) {
        dst[0] = src[p[0] as usize];
        dst[1] = src[p[1] as usize];
        dst[2] = src[p[2] as usize];
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentationDecision {
    pub applied: bool,
    /// Identity whenever `applied` is false.
    pub permutation: ChannelPermutation,
    /// Probability the decision was drawn with.
    pub degree: f64,
}

/// With probability `degree`, shuffle channels by one of the five
/// non-identity permutations (uniformly); otherwise return the image as is.
///
/// Always draws exactly two values from `rng`, so callers see the same stream
/// position whatever the outcome.
pub fn maybe_augment<R: Rng + ?Sized>(
    image: &Image,
    degree: f64,
    rng: &mut R,
) -> Result<(Image, AugmentationDecision)> {
    if !(0.0..=1.0).contains(&degree) {
        return Err(Error::invalid(format!("augmentation degree {degree} outside [0, 1]")));
    }
    let u: f64 = rng.gen();
    let pick = rng.gen_range(0..5usize);
    if u < degree {
        let perm = ChannelPermutation::non_identity()[pick];
        let out = rgb_shuffle(image, perm)?;
        Ok((out, AugmentationDecision { applied: true, permutation: perm, degree }))
    } else {
        Ok((image.clone(), AugmentationDecision { applied: false, permutation: ChannelPermutation::IDENTITY, degree }))
    }
}

/// Brightness/contrast jitter: `x ← clamp((x − ½)·(1 + c) + ½ + b)` with `b`
/// and `c` uniform in `±amplitude`. At amplitude 1 the contrast factor can
/// reach 0, which flattens the image; larger amplitudes would invert it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorJitter {
    pub amplitude: f64,
}

impl ColorJitter {
    pub const MAX_AMPLITUDE: f64 = 1.0;

    pub fn new(amplitude: f64) -> Result<Self> {
        if !(0.0..=Self::MAX_AMPLITUDE).contains(&amplitude) {
            return Err(Error::invalid(format!("jitter amplitude {amplitude} outside [0, {}]", Self::MAX_AMPLITUDE)));
        }
        Ok(ColorJitter { amplitude })
    }

    /// Draws two values from `rng` even when the amplitude is zero.
    pub fn apply<R: Rng + ?Sized>(&self, image: &mut Image, rng: &mut R) {
        let b = rng.gen_range(-1.0..=1.0) * self.amplitude;
        let c = rng.gen_range(-1.0..=1.0) * self.amplitude;
        if self.amplitude == 0.0 {
            return;
        }
        for v in image.data_mut() {
            *v = ((*v - 0.5) * (1.0 + c) + 0.5 + b).clamp(0.0, 1.0);
        }
    }
}
