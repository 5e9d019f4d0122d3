use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{bail, Result};
use crate::fft::RealFft;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hann,
}

impl Window {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub window: Window,
    pub center_pad: bool,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self { n_fft: 2048, hop: 512, window: Window::Hann, center_pad: true }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_fft < 2 || !self.n_fft.is_power_of_two() {
            bail!(Config, "n_fft must be a power of two >= 2, got {}", self.n_fft);
        }
        if self.hop == 0 || self.hop > self.n_fft {
            bail!(Config, "hop must satisfy 0 < hop <= n_fft, got {}", self.hop);
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn frames_for(&self, len: usize) -> Option<usize> {
        if self.center_pad {
            Some(1 + len / self.hop)
        } else if len >= self.n_fft {
            Some(1 + (len - self.n_fft) / self.hop)
        } else {
            None
        }
    }

    pub fn bin_hz(&self, sample_rate: u32) -> f64 {
        f64::from(sample_rate) / self.n_fft as f64
    }
}

/// Complex STFT, frame-major: value `(t, k)` lives at `t * bins + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub bins: usize,
    pub frames: usize,
    pub data: Vec<Complex64>,
}

impl Spectrogram {
    pub fn zeros(bins: usize, frames: usize) -> Self {
        Self { bins, frames, data: vec![Complex64::default(); bins * frames] }
    }

    #[inline]
    pub fn at(&self, t: usize, k: usize) -> Complex64 {
        self.data[t * self.bins + k]
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }

    /// Magnitudes as a `[bins x frames]` matrix (frequency rows).
    pub fn magnitude(&self) -> super::Matrix {
        let mut m = super::Matrix::zeros(self.bins, self.frames);
        for t in 0..self.frames {
            for k in 0..self.bins {
                m.data[k * self.frames + t] = self.data[t * self.bins + k].norm();
            }
        }
        m
    }
}

/// Planned STFT/ISTFT pair for one configuration.
#[derive(Debug, Clone)]
pub struct Stft {
    cfg: StftConfig,
    fft: RealFft,
    window: Vec<f64>,
    invertible: bool,
}

impl Stft {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let window = cfg.window.coefficients(cfg.n_fft);
        // Weighted overlap-add divides by the summed squared window; the
        // inverse is only defined when that envelope is bounded away from
        // zero over a full hop period.
        let mut envelope = vec![0.0; cfg.hop];
        for (i, w) in window.iter().enumerate() {
            envelope[i % cfg.hop] += w * w;
        }
        let max = envelope.iter().cloned().fold(0.0, f64::max);
        let min = envelope.iter().cloned().fold(f64::INFINITY, f64::min);
        let invertible = max > 0.0 && min > 1e-3 * max;
        Ok(Self { cfg, fft: RealFft::new(cfg.n_fft)?, window, invertible })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn forward(&self, signal: &[f64]) -> Result<Spectrogram> {
        let n = self.cfg.n_fft;
        let hop = self.cfg.hop;
        let frames = match self.cfg.frames_for(signal.len()) {
            Some(f) => f,
            None => bail!(Length, "signal of {} samples is shorter than n_fft = {n}", signal.len()),
        };
        let pad = if self.cfg.center_pad { n / 2 } else { 0 };
        let bins = self.cfg.bins();
        let mut out = Spectrogram::zeros(bins, frames);
        let mut buf = vec![0.0; n];
        let mut scratch = vec![Complex64::default(); n / 2];
        for t in 0..frames {
            let start = (t * hop) as isize - pad as isize;
            for (i, b) in buf.iter_mut().enumerate() {
                let idx = start + i as isize;
                *b = if idx >= 0 && (idx as usize) < signal.len() {
                    signal[idx as usize] * self.window[i]
                } else {
                    0.0
                };
            }
            self.fft.forward(&buf, &mut out.data[t * bins..(t + 1) * bins], &mut scratch);
        }
        Ok(out)
    }

    /// Least-squares inverse (weighted overlap-add), trimmed to `length`.
    pub fn inverse(&self, spec: &Spectrogram, length: usize) -> Result<Vec<f64>> {
        if !self.invertible {
            bail!(
                Config,
                "hop {} with a {}-point {:?} window violates the overlap-add condition",
                self.cfg.hop,
                self.cfg.n_fft,
                self.cfg.window
            );
        }
        let n = self.cfg.n_fft;
        let hop = self.cfg.hop;
        if spec.bins != self.cfg.bins() {
            bail!(Shape, "spectrogram has {} bins, configuration expects {}", spec.bins, self.cfg.bins());
        }
        let pad = if self.cfg.center_pad { n / 2 } else { 0 };
        let total = (spec.frames.saturating_sub(1)) * hop + n;
        let mut acc = vec![0.0; total.max(length + pad)];
        let mut env = vec![0.0; acc.len()];
        let mut buf = vec![0.0; n];
        let mut scratch = vec![Complex64::default(); n / 2];
        for t in 0..spec.frames {
            self.fft.inverse(spec.frame(t), &mut buf, &mut scratch);
            let start = t * hop;
            for i in 0..n {
                acc[start + i] += buf[i] * self.window[i];
                env[start + i] += self.window[i] * self.window[i];
            }
        }
        let mut out = vec![0.0; length];
        for (i, o) in out.iter_mut().enumerate() {
            let j = i + pad;
            if j < acc.len() && env[j] > 1e-10 {
                *o = acc[j] / env[j];
            }
        }
        Ok(out)
    }
}

/// STFT of a mono clip.
pub fn stft_clip(clip: &AudioClip, cfg: StftConfig) -> Result<Spectrogram> {
    if clip.num_channels() != 1 {
        bail!(Argument, "STFT expects a mono clip, got {} channels", clip.num_channels());
    }
    Stft::new(cfg)?.forward(&clip.channel_f64(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::rng_from(seed);
        (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
    }

    #[test]
    fn frame_geometry_for_default_excerpt() {
        let cfg = StftConfig::default();
        assert_eq!(cfg.frames_for(35280), Some(69));
        assert_eq!(cfg.frames_for(35280), Some(1 + 35280 / 512));
        let raw = StftConfig { center_pad: false, ..cfg };
        assert_eq!(raw.frames_for(100), None);
        assert!(Stft::new(raw).unwrap().forward(&[0.0; 100]).is_err());
    }

    #[test]
    fn invalid_geometry_rejected() {
        assert!(StftConfig { n_fft: 1000, ..Default::default() }.validate().is_err());
        assert!(StftConfig { hop: 0, ..Default::default() }.validate().is_err());
        assert!(StftConfig { hop: 4096, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn hop_equal_to_window_is_not_invertible() {
        let s = Stft::new(StftConfig { n_fft: 64, hop: 64, ..Default::default() }).unwrap();
        let spec = s.forward(&noise(640, 1)).unwrap();
        assert!(matches!(s.inverse(&spec, 640), Err(crate::Error::Config(_))));
    }

    #[test]
    fn zero_signal_gives_zero_planes() {
        let s = Stft::new(StftConfig::default()).unwrap();
        let spec = s.forward(&vec![0.0; 4096]).unwrap();
        assert!(spec.data.iter().all(|z| z.norm() == 0.0));
        assert!(s.inverse(&spec, 4096).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_spectrum_is_flat_window_value() {
        let cfg = StftConfig { n_fft: 256, hop: 64, ..Default::default() };
        let s = Stft::new(cfg).unwrap();
        let mut x = vec![0.0; 1024];
        // Frame 4 is centred on sample 256; put the impulse 10 samples later.
        x[266] = 1.0;
        let spec = s.forward(&x).unwrap();
        let w = s.window()[128 + 10];
        // Oracle: direct DFT of the windowed frame has constant magnitude.
        for k in 0..cfg.bins() {
            assert!((spec.at(4, k).norm() - w).abs() < 1e-12);
        }
    }

    #[test]
    fn parseval_with_window_normalization() {
        let cfg = StftConfig::default();
        let s = Stft::new(cfg).unwrap();
        let mut x = noise(44100, 3);
        // Keep the edges silent so every sample sees the full window overlap.
        x[..2048].fill(0.0);
        x[44100 - 2048..].fill(0.0);
        let spec = s.forward(&x).unwrap();
        let win_sq: f64 = s.window().iter().map(|w| w * w).sum();
        let mut spectral = 0.0;
        for t in 0..spec.frames {
            for k in 0..spec.bins {
                let weight = if k == 0 || k == spec.bins - 1 { 1.0 } else { 2.0 };
                spectral += weight * spec.at(t, k).norm_sqr();
            }
        }
        // Each sample is covered by frames whose squared windows sum to
        // win_sq / hop; DFT energy carries a factor n_fft.
        let spectral = spectral / (cfg.n_fft as f64 * win_sq / cfg.hop as f64);
        let energy: f64 = x.iter().map(|v| v * v).sum();
        assert!((spectral - energy).abs() / energy < 1e-3, "{spectral} vs {energy}");
    }

    #[test]
    fn white_noise_round_trip() {
        let s = Stft::new(StftConfig::default()).unwrap();
        let x = noise(30000, 5);
        let y = s.inverse(&s.forward(&x).unwrap(), x.len()).unwrap();
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn sine_round_trip_snr() {
        let s = Stft::new(StftConfig::default()).unwrap();
        let x: Vec<f64> = (0..44100).map(|i| (2.0 * PI * 440.0 * i as f64 / 44100.0).sin()).collect();
        let y = s.inverse(&s.forward(&x).unwrap(), x.len()).unwrap();
        let sig: f64 = x.iter().map(|v| v * v).sum();
        let res: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        assert!(10.0 * (sig / res).log10() > 60.0);
    }
}
