//! In-memory audio clips and the sample-domain preprocessing applied before
//! any spectral transform: mono mixing, peak normalization, excerpting and
//! band-limited resampling.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{bail, Result};
use crate::rng;

/// Rate every clip is converted to at load time.
pub const CANONICAL_RATE: u32 = 44_100;

/// Decoded PCM, one `Vec` per channel, samples nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    channels: Vec<Vec<f32>>,
    sample_rate: u32,
    pub source_path: String,
}

impl AudioClip {
    pub fn new(channels: Vec<Vec<f32>>, sample_rate: u32) -> Result<Self> {
        if channels.is_empty() || channels.len() > 2 {
            bail!(Argument, "clips carry 1 or 2 channels, got {}", channels.len());
        }
        let frames = channels[0].len();
        if frames == 0 {
            bail!(Length, "clip has no frames");
        }
        if channels.iter().any(|c| c.len() != frames) {
            bail!(Shape, "channels have different lengths");
        }
        if sample_rate == 0 {
            bail!(Argument, "sample rate must be positive");
        }
        if channels.iter().flatten().any(|s| !s.is_finite()) {
            bail!(Argument, "clip contains non-finite samples");
        }
        Ok(Self { channels, sample_rate, source_path: String::new() })
    }

    pub fn mono(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        Self::new(vec![samples], sample_rate)
    }

    /// Builds a clip from `f64` channels (the precision DSP runs at).
    pub fn from_f64(channels: &[Vec<f64>], sample_rate: u32) -> Result<Self> {
        Self::new(
            channels.iter().map(|c| c.iter().map(|&s| s as f32).collect()).collect(),
            sample_rate,
        )
    }

    pub fn with_source(mut self, path: impl Into<String>) -> Self {
        self.source_path = path.into();
        self
    }

    pub fn channels(&self) -> &[Vec<f32>] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> &[f32] {
        &self.channels[i]
    }

    pub fn channel_f64(&self, i: usize) -> Vec<f64> {
        self.channels[i].iter().map(|&s| f64::from(s)).collect()
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn frames(&self) -> usize {
        self.channels[0].len()
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_s(&self) -> f64 {
        self.frames() as f64 / f64::from(self.sample_rate)
    }

    pub fn peak(&self) -> f32 {
        self.channels.iter().flatten().fold(0.0f32, |m, s| m.max(s.abs()))
    }

    /// Applies `f` to every channel (as `f64`), rebuilding the clip.
    pub fn map_channels<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, &[f64]) -> Result<Vec<f64>>,
    {
        let mut out = Vec::with_capacity(self.num_channels());
        for i in 0..self.num_channels() {
            out.push(f(i, &self.channel_f64(i))?);
        }
        Ok(Self::from_f64(&out, self.sample_rate)?.with_source(self.source_path.clone()))
    }

    /// `alpha * L + (1 - alpha) * R`; mono input is returned unchanged.
    pub fn to_mono(&self, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            bail!(Argument, "mono mix coefficient {alpha} outside [0, 1]");
        }
        if self.num_channels() == 1 {
            return Ok(self.clone());
        }
        let (l, r) = (&self.channels[0], &self.channels[1]);
        let a = alpha as f32;
        let b = (1.0 - alpha) as f32;
        let mixed = l.iter().zip(r).map(|(&x, &y)| a * x + b * y).collect();
        Ok(Self { channels: vec![mixed], sample_rate: self.sample_rate, source_path: self.source_path.clone() })
    }

    /// Scales so that the maximum absolute sample is exactly 1. Silent clips
    /// are returned unchanged. Division (rather than multiplication by the
    /// reciprocal) makes the operation idempotent bit for bit.
    pub fn peak_normalize(&self) -> Self {
        let peak = self.peak();
        if peak == 0.0 {
            return self.clone();
        }
        let channels = self.channels.iter().map(|c| c.iter().map(|&s| s / peak).collect()).collect();
        Self { channels, sample_rate: self.sample_rate, source_path: self.source_path.clone() }
    }

    /// Contiguous sub-clip `[start, start + frames)`.
    pub fn slice(&self, start: usize, frames: usize) -> Result<Self> {
        if frames == 0 || start + frames > self.frames() {
            bail!(Length, "slice [{start}, {}) outside clip of {} frames", start + frames, self.frames());
        }
        let channels = self.channels.iter().map(|c| c[start..start + frames].to_vec()).collect();
        Ok(Self { channels, sample_rate: self.sample_rate, source_path: self.source_path.clone() })
    }

    pub fn frames_for(&self, length_s: f64) -> usize {
        (length_s * f64::from(self.sample_rate)).round() as usize
    }

    /// Offset of an excerpt of `frames` frames selected by a uniform draw
    /// `u` in `[0, 1)`. Using the same `u` on clips of different lengths
    /// selects the same relative position.
    pub fn excerpt_offset(&self, frames: usize, u: f64) -> usize {
        let slack = self.frames() - frames;
        ((u * (slack + 1) as f64) as usize).min(slack)
    }

    /// Excerpt of `round(length_s * rate)` frames at a seeded uniform offset.
    pub fn random_excerpt(&self, length_s: f64, seed: u64) -> Result<Self> {
        let frames = self.frames_for(length_s);
        if frames == 0 {
            bail!(Argument, "excerpt length {length_s} s is empty");
        }
        if frames > self.frames() {
            bail!(
                Length,
                "clip of {:.3} s is shorter than the requested {length_s} s excerpt",
                self.duration_s()
            );
        }
        let start = self.excerpt_offset(frames, rng::unit_from_seed(seed));
        self.slice(start, frames)
    }

    /// Trims or zero-pads every channel to exactly `frames` frames.
    pub fn fit_to(&self, frames: usize) -> Result<Self> {
        if frames == 0 {
            bail!(Length, "cannot fit a clip to zero frames");
        }
        let channels = self
            .channels
            .iter()
            .map(|c| {
                let mut v = c.clone();
                v.resize(frames, 0.0);
                v
            })
            .collect();
        Ok(Self { channels, sample_rate: self.sample_rate, source_path: self.source_path.clone() })
    }

    pub fn clamp_unit(&self) -> Self {
        let channels = self.channels.iter().map(|c| c.iter().map(|s| s.clamp(-1.0, 1.0)).collect()).collect();
        Self { channels, sample_rate: self.sample_rate, source_path: self.source_path.clone() }
    }

    /// Band-limited conversion to `target_rate`; identity when rates match.
    pub fn resample(&self, target_rate: u32) -> Result<Self> {
        if target_rate == 0 {
            bail!(Argument, "target rate must be positive");
        }
        if target_rate == self.sample_rate {
            return Ok(self.clone());
        }
        let resampler = Resampler::default();
        let ratio = f64::from(self.sample_rate) / f64::from(target_rate);
        let out_len = ((self.frames() as f64 / ratio).round() as usize).max(1);
        let channels: Vec<Vec<f64>> = (0..self.num_channels())
            .map(|i| resampler.process(&self.channel_f64(i), ratio, out_len))
            .collect();
        Ok(Self::from_f64(&channels, target_rate)?.with_source(self.source_path.clone()))
    }
}

/// Kaiser-windowed sinc interpolator with a tabulated kernel.
#[derive(Debug, Clone)]
pub struct Resampler {
    half_width: usize,
    resolution: usize,
    table: Vec<f64>,
}

impl Default for Resampler {
    fn default() -> Self {
        Self::new(24, 512, 8.0)
    }
}

impl Resampler {
    /// `half_width` zero crossings per side, `resolution` table entries per
    /// zero crossing, Kaiser shape `beta`.
    pub fn new(half_width: usize, resolution: usize, beta: f64) -> Self {
        let len = half_width * resolution + 2;
        let i0_beta = bessel_i0(beta);
        let table = (0..len)
            .map(|j| {
                if j % resolution == 0 {
                    return if j == 0 { 1.0 } else { 0.0 };
                }
                let x = j as f64 / resolution as f64;
                if x >= half_width as f64 {
                    return 0.0;
                }
                let r = x / half_width as f64;
                let window = bessel_i0(beta * (1.0 - r * r).sqrt()) / i0_beta;
                (PI * x).sin() / (PI * x) * window
            })
            .collect();
        Self { half_width, resolution, table }
    }

    fn kernel(&self, x: f64) -> f64 {
        let pos = x.abs() * self.resolution as f64;
        let i = pos as usize;
        if i + 1 >= self.table.len() {
            return 0.0;
        }
        let frac = pos - i as f64;
        self.table[i] + frac * (self.table[i + 1] - self.table[i])
    }

    /// Reads `input` at positions `n * step` for `n < out_len`. `step > 1`
    /// decimates and lowers the kernel cutoff accordingly.
    pub fn process(&self, input: &[f64], step: f64, out_len: usize) -> Vec<f64> {
        let cutoff = if step > 1.0 { 1.0 / step } else { 1.0 };
        let reach = self.half_width as f64 / cutoff;
        let mut out = vec![0.0; out_len];
        for (n, y) in out.iter_mut().enumerate() {
            let t = n as f64 * step;
            let lo = (t - reach).ceil().max(0.0) as usize;
            let hi = ((t + reach).floor() as isize).min(input.len() as isize - 1);
            if hi < lo as isize {
                continue;
            }
            let mut acc = 0.0;
            for (k, &x) in input.iter().enumerate().take(hi as usize + 1).skip(lo) {
                acc += x * self.kernel(cutoff * (t - k as f64));
            }
            *y = cutoff * acc;
        }
        out
    }
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}
