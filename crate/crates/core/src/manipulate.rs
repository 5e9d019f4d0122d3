//! Audio transformations used to probe detector robustness.
//!
//! All operations act on waveforms, are deterministic given their
//! parameters and seed, and clamp their output to `[-1, 1]`. Re-encoding
//! through lossy codecs needs an external transcoder, supplied by the caller
//! through [`Reencoder`].

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{LN_10, PI};
use core::fmt;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{bail, Error, Result};
use crate::rng;
use crate::vocoder::PhaseVocoder;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Codec {
    Mp3,
    Aac,
    Opus,
}

impl Codec {
    pub fn as_str(self) -> &'static str {
        match self {
            Codec::Mp3 => "mp3",
            Codec::Aac => "aac",
            Codec::Opus => "opus",
        }
    }
}

/// The eight robustness probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManipulationKind {
    PitchShift,
    TimeStretch,
    Eq,
    Reverb,
    WhiteNoise,
    ReencodeMp3,
    ReencodeAac,
    ReencodeOpus,
}

impl ManipulationKind {
    pub const ALL: [ManipulationKind; 8] = [
        ManipulationKind::PitchShift,
        ManipulationKind::TimeStretch,
        ManipulationKind::Eq,
        ManipulationKind::Reverb,
        ManipulationKind::WhiteNoise,
        ManipulationKind::ReencodeMp3,
        ManipulationKind::ReencodeAac,
        ManipulationKind::ReencodeOpus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ManipulationKind::PitchShift => "pitch_shift",
            ManipulationKind::TimeStretch => "time_stretch",
            ManipulationKind::Eq => "eq",
            ManipulationKind::Reverb => "reverb",
            ManipulationKind::WhiteNoise => "white_noise",
            ManipulationKind::ReencodeMp3 => "reencode_mp3",
            ManipulationKind::ReencodeAac => "reencode_aac",
            ManipulationKind::ReencodeOpus => "reencode_opus",
        }
    }

    pub fn codec(self) -> Option<Codec> {
        match self {
            ManipulationKind::ReencodeMp3 => Some(Codec::Mp3),
            ManipulationKind::ReencodeAac => Some(Codec::Aac),
            ManipulationKind::ReencodeOpus => Some(Codec::Opus),
            _ => None,
        }
    }

    pub fn needs_transcoder(self) -> bool {
        self.codec().is_some()
    }
}

impl fmt::Display for ManipulationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for ManipulationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ManipulationKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Argument(alloc::format!("unknown manipulation '{s}'")))
    }
}

/// Bitrate used for all re-encoding probes, in kbit/s.
pub const REENCODE_KBPS: u32 = 64;
/// Default white-noise level.
pub const DEFAULT_SNR_DB: f64 = 20.0;

/// A fully parameterised manipulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Manipulation {
    Identity,
    PitchShift { semitones: f64 },
    TimeStretch { rate: f64 },
    Eq { center_hz: f64, gain_db: f64, q: f64 },
    Reverb { rt60_s: f64, wet: f64, seed: u64 },
    WhiteNoise { snr_db: f64, seed: u64 },
    Reencode { codec: Codec, bitrate_kbps: u32 },
}

/// Lossy encode/decode round trip behind an external tool.
pub trait Reencoder {
    fn reencode(&self, clip: &AudioClip, codec: Codec, bitrate_kbps: u32) -> Result<AudioClip>;
}

impl Manipulation {
    /// Draws parameters from the probe ranges: pitch in [-2, 2] semitones,
    /// stretch rate in [0.8, 1.2], EQ centre log-uniform in [100, 8000] Hz
    /// with gain in [-6, 6] dB at Q = 1, reverb RT60 in [0.3, 1.2] s with wet
    /// mix in [0.2, 0.5], white noise at 20 dB SNR, codecs at 64 kbit/s.
    pub fn sample(kind: ManipulationKind, seed: u64) -> Self {
        let mut r = rng::rng_from(seed);
        match kind {
            ManipulationKind::PitchShift => Manipulation::PitchShift { semitones: r.random_range(-2.0..=2.0) },
            ManipulationKind::TimeStretch => Manipulation::TimeStretch { rate: r.random_range(0.8..=1.2) },
            ManipulationKind::Eq => {
                let log_f: f64 = r.random_range(100f64.ln()..=8000f64.ln());
                Manipulation::Eq { center_hz: log_f.exp(), gain_db: r.random_range(-6.0..=6.0), q: 1.0 }
            }
            ManipulationKind::Reverb => Manipulation::Reverb {
                rt60_s: r.random_range(0.3..=1.2),
                wet: r.random_range(0.2..=0.5),
                seed: r.random(),
            },
            ManipulationKind::WhiteNoise => Manipulation::WhiteNoise { snr_db: DEFAULT_SNR_DB, seed: r.random() },
            k => Manipulation::Reencode { codec: k.codec().expect("codec kind"), bitrate_kbps: REENCODE_KBPS },
        }
    }

    pub fn kind(&self) -> Option<ManipulationKind> {
        Some(match self {
            Manipulation::Identity => return None,
            Manipulation::PitchShift { .. } => ManipulationKind::PitchShift,
            Manipulation::TimeStretch { .. } => ManipulationKind::TimeStretch,
            Manipulation::Eq { .. } => ManipulationKind::Eq,
            Manipulation::Reverb { .. } => ManipulationKind::Reverb,
            Manipulation::WhiteNoise { .. } => ManipulationKind::WhiteNoise,
            Manipulation::Reencode { codec: Codec::Mp3, .. } => ManipulationKind::ReencodeMp3,
            Manipulation::Reencode { codec: Codec::Aac, .. } => ManipulationKind::ReencodeAac,
            Manipulation::Reencode { codec: Codec::Opus, .. } => ManipulationKind::ReencodeOpus,
        })
    }

    pub fn label(&self) -> String {
        String::from(self.kind().map_or("identity", ManipulationKind::as_str))
    }

    pub fn apply(&self, clip: &AudioClip, reencoder: Option<&dyn Reencoder>) -> Result<AudioClip> {
        match *self {
            Manipulation::Identity => Ok(clip.clone()),
            Manipulation::PitchShift { semitones } => pitch_shift(clip, semitones),
            Manipulation::TimeStretch { rate } => time_stretch(clip, rate),
            Manipulation::Eq { center_hz, gain_db, q } => eq(clip, center_hz, gain_db, q),
            Manipulation::Reverb { rt60_s, wet, seed } => reverb(clip, rt60_s, wet, seed),
            Manipulation::WhiteNoise { snr_db, seed } => add_white_noise(clip, snr_db, seed),
            Manipulation::Reencode { codec, bitrate_kbps } => match reencoder {
                Some(r) => Ok(r.reencode(clip, codec, bitrate_kbps)?.clamp_unit()),
                None => bail!(Config, "re-encoding to {} needs a configured transcoder", codec.as_str()),
            },
        }
    }
}

/// Constant-duration pitch shift through the phase vocoder.
pub fn pitch_shift(clip: &AudioClip, semitones: f64) -> Result<AudioClip> {
    if semitones.abs() > 12.0 {
        bail!(Argument, "pitch shift limited to +-12 semitones, got {semitones}");
    }
    let pv = PhaseVocoder::default();
    Ok(clip.map_channels(|_, x| pv.pitch_shift(x, semitones))?.clamp_unit())
}

/// Duration becomes `input / rate`; pitch is preserved.
pub fn time_stretch(clip: &AudioClip, rate: f64) -> Result<AudioClip> {
    let pv = PhaseVocoder::default();
    Ok(clip.map_channels(|_, x| pv.stretch(x, rate))?.clamp_unit())
}

/// Biquad coefficients `[b0, b1, b2, a1, a2]` (normalized by `a0`) of a
/// peaking equalizer.
pub fn peaking_coefficients(center_hz: f64, gain_db: f64, q: f64, sample_rate: u32) -> [f64; 5] {
    let a = 10f64.powf(gain_db / 40.0);
    let w0 = 2.0 * PI * center_hz / f64::from(sample_rate);
    let alpha = w0.sin() / (2.0 * q);
    let cos = w0.cos();
    let a0 = 1.0 + alpha / a;
    [(1.0 + alpha * a) / a0, -2.0 * cos / a0, (1.0 - alpha * a) / a0, -2.0 * cos / a0, (1.0 - alpha / a) / a0]
}

/// Single peaking biquad.
pub fn eq(clip: &AudioClip, center_hz: f64, gain_db: f64, q: f64) -> Result<AudioClip> {
    let nyquist = f64::from(clip.sample_rate()) / 2.0;
    if !(center_hz > 0.0 && center_hz < nyquist) {
        bail!(Argument, "EQ centre {center_hz} Hz must lie in (0, {nyquist})");
    }
    if !(q > 0.0) || !gain_db.is_finite() {
        bail!(Argument, "EQ needs q > 0 and a finite gain");
    }
    let [b0, b1, b2, a1, a2] = peaking_coefficients(center_hz, gain_db, q, clip.sample_rate());
    let filtered = clip.map_channels(|_, x| {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        Ok(x.iter()
            .map(|&x0| {
                let y0 = b0 * x0 + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
                x2 = x1;
                x1 = x0;
                y2 = y1;
                y1 = y0;
                y0
            })
            .collect())
    })?;
    Ok(filtered.clamp_unit())
}

/// Exponentially decaying Gaussian noise whose energy envelope falls by
/// 60 dB over `rt60_s`; unit total energy.
pub fn reverb_ir(rt60_s: f64, sample_rate: u32, seed: u64) -> Vec<f64> {
    let sr = f64::from(sample_rate);
    let len = ((rt60_s * sr).ceil() as usize).max(1);
    // Amplitude decays 60 dB (a factor 1000) over rt60.
    let decay = 3.0 * LN_10 / (rt60_s * sr);
    let mut r = rng::rng_from(seed);
    let mut ir: Vec<f64> = (0..len)
        .map(|i| {
            let g: f64 = StandardNormal.sample(&mut r);
            g * (-decay * i as f64).exp()
        })
        .collect();
    let energy: f64 = ir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if energy > 0.0 {
        ir.iter_mut().for_each(|v| *v /= energy);
    }
    ir
}

/// `(1 - wet) * dry + wet * (dry * IR)`, tail truncated to the input length.
pub fn reverb(clip: &AudioClip, rt60_s: f64, wet: f64, seed: u64) -> Result<AudioClip> {
    if !(rt60_s > 0.0) {
        bail!(Argument, "RT60 must be positive, got {rt60_s}");
    }
    if !(0.0..=1.0).contains(&wet) {
        bail!(Argument, "wet mix {wet} outside [0, 1]");
    }
    if wet == 0.0 {
        return Ok(clip.clamp_unit());
    }
    let out = clip.map_channels(|c, x| {
        let ir = reverb_ir(rt60_s, clip.sample_rate(), rng::derive(seed, "reverb-channel", c as u64));
        let conv = crate::fft::convolve(x, &ir);
        Ok(x.iter().zip(&conv).map(|(&d, &w)| (1.0 - wet) * d + wet * w).collect())
    })?;
    Ok(out.clamp_unit())
}

/// Seeded Gaussian noise at exactly `P_signal / 10^(snr/10)` power (before
/// the final clamp). `snr_db = +inf` is the identity.
pub fn add_white_noise(clip: &AudioClip, snr_db: f64, seed: u64) -> Result<AudioClip> {
    if snr_db == f64::INFINITY {
        return Ok(clip.clone());
    }
    if !snr_db.is_finite() {
        bail!(Argument, "SNR must be finite or +inf, got {snr_db}");
    }
    let n = (clip.frames() * clip.num_channels()) as f64;
    let power: f64 = clip.channels().iter().flatten().map(|&s| f64::from(s) * f64::from(s)).sum::<f64>() / n;
    if power == 0.0 {
        bail!(Argument, "SNR is undefined for a silent clip");
    }
    let mut r = rng::rng_from(seed);
    let noise: Vec<Vec<f64>> = (0..clip.num_channels())
        .map(|_| (0..clip.frames()).map(|_| StandardNormal.sample(&mut r)).collect())
        .collect();
    let realized: f64 = noise.iter().flatten().map(|v| v * v).sum::<f64>() / n;
    let gain = (power / 10f64.powf(snr_db / 10.0) / realized).sqrt();
    let out = clip.map_channels(|c, x| Ok(x.iter().zip(&noise[c]).map(|(s, v)| s + gain * v).collect()))?;
    Ok(out.clamp_unit())
}
