use rand::Rng as _;

use crate::error::{bail, Result};
use crate::rng::Rng;

/// Class drawn for one training example.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Draw {
    Real,
    /// Index into the trainer's decoder list.
    Fake(usize),
}

/// Real with probability `1 - fake_prob`, otherwise a decoder chosen
/// uniformly.
#[derive(Debug, Clone, Copy)]
pub struct ClassSampler {
    pub fake_prob: f64,
    pub n_decoders: usize,
}

impl ClassSampler {
    pub fn new(fake_prob: f64, n_decoders: usize) -> Result<Self> {
        if !(fake_prob > 0.0 && fake_prob < 1.0) {
            bail!(Argument, "fake probability must lie in (0, 1), got {fake_prob}");
        }
        if n_decoders == 0 {
            bail!(Argument, "need at least one fake decoder");
        }
        Ok(Self { fake_prob, n_decoders })
    }

    pub fn draw(&self, rng: &mut Rng) -> Draw {
        if rng.random_bool(self.fake_prob) {
            Draw::Fake(rng.random_range(0..self.n_decoders))
        } else {
            Draw::Real
        }
    }
}

/// Uniform top-left corner of a `size x size` crop (height capped at the
/// input height for single-row inputs).
pub fn crop_offset(height: usize, width: usize, crop_h: usize, crop_w: usize, rng: &mut Rng) -> Result<(usize, usize)> {
    if crop_h > height || crop_w > width {
        bail!(Length, "crop {crop_h}x{crop_w} larger than input {height}x{width}");
    }
    Ok((rng.random_range(0..=height - crop_h), rng.random_range(0..=width - crop_w)))
}
