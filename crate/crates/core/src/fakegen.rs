//! GriffinMel: mel analysis, pseudo-inverse synthesis and Griffin-Lim phase
//! retrieval applied to real audio to manufacture paired fakes.

use alloc::vec::Vec;

use crate::audio::AudioClip;
use crate::dsp::{griffin_lim, GriffinLimConfig, MelFilterbank, Stft, StftConfig};
use crate::error::Result;
use crate::rng;

/// Band counts of the two shipped configurations.
pub const GRIFFINMEL_BANDS: [usize; 2] = [256, 512];

/// Reusable GriffinMel renderer; the filterbank pseudo-inverse is computed once.
#[derive(Debug, Clone)]
pub struct GriffinMel {
    stft: Stft,
    filterbank: MelFilterbank,
    gl: GriffinLimConfig,
}

impl GriffinMel {
    pub fn new(n_mels: usize, cfg: StftConfig, n_iter: usize, sample_rate: u32) -> Result<Self> {
        let stft = Stft::new(cfg)?;
        let filterbank = MelFilterbank::full_band(n_mels, cfg.n_fft, sample_rate)?;
        Ok(Self { stft, filterbank, gl: GriffinLimConfig { n_iter, ..GriffinLimConfig::default() } })
    }

    pub fn n_mels(&self) -> usize {
        self.filterbank.n_mels
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// Renders every channel independently and peak-normalizes the result.
    /// The output has exactly the input's frame count.
    pub fn reconstruct(&self, clip: &AudioClip, seed: u64) -> Result<AudioClip> {
        let out = clip.map_channels(|c, x| self.reconstruct_channel(x, rng::derive(seed, "griffinmel-channel", c as u64)))?;
        Ok(out.peak_normalize())
    }

    pub fn reconstruct_channel(&self, x: &[f64], seed: u64) -> Result<Vec<f64>> {
        let amplitude = self.stft.forward(x)?.magnitude();
        let mel = self.filterbank.forward(&amplitude)?;
        let approx = self.filterbank.invert(&mel)?;
        Ok(griffin_lim(&approx, &self.stft, x.len(), self.gl, seed)?.signal)
    }
}

/// One-shot GriffinMel reconstruction at the clip's own rate.
pub fn griffinmel_reconstruct(clip: &AudioClip, n_mels: usize, cfg: StftConfig, n_iter: usize, seed: u64) -> Result<AudioClip> {
    GriffinMel::new(n_mels, cfg, n_iter, clip.sample_rate())?.reconstruct(clip, seed)
}
