use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{lowpass, Stft, StftConfig};
use crate::audio::AudioClip;
use crate::error::{bail, Error, Result};
use crate::fft::principal_angle;

/// Amplitudes are floored at this value before the decibel conversion.
pub const DB_EPSILON: f64 = 1e-5;
/// `20 * log10(DB_EPSILON)`.
pub const DB_FLOOR: f64 = -100.0;

/// The five detector input representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RepKind {
    Waveform,
    Complex,
    #[default]
    Amplitude,
    Phase,
    Polar,
}

impl RepKind {
    pub const ALL: [RepKind; 5] =
        [RepKind::Waveform, RepKind::Complex, RepKind::Amplitude, RepKind::Phase, RepKind::Polar];

    pub fn channels(self) -> usize {
        match self {
            RepKind::Waveform | RepKind::Amplitude | RepKind::Phase => 1,
            RepKind::Complex | RepKind::Polar => 2,
        }
    }

    /// Whether plane `c` of this representation is in decibels.
    pub fn is_db_plane(self, c: usize) -> bool {
        matches!((self, c), (RepKind::Amplitude, 0) | (RepKind::Polar, 0))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RepKind::Waveform => "waveform",
            RepKind::Complex => "complex",
            RepKind::Amplitude => "amplitude",
            RepKind::Phase => "phase",
            RepKind::Polar => "polar",
        }
    }
}

impl fmt::Display for RepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RepKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Argument(alloc::format!("unknown representation '{s}'")))
    }
}

/// A detector input: `channels` planes of `height x width` (frequency rows,
/// time columns), or a single `1 x T` row for the waveform kind.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralRep {
    pub kind: RepKind,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
    pub config: StftConfig,
    pub freq_cutoff_hz: f64,
    pub sample_rate: u32,
}

impl SpectralRep {
    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn at(&self, c: usize, row: usize, col: usize) -> f32 {
        self.data[(c * self.height + row) * self.width + col]
    }

    /// Copy of the `[rows, rows+h) x [cols, cols+w)` window of every plane.
    pub fn crop(&self, row: usize, col: usize, h: usize, w: usize) -> Result<Self> {
        if row + h > self.height || col + w > self.width {
            bail!(
                Length,
                "crop {h}x{w} at ({row}, {col}) exceeds {}x{} representation",
                self.height,
                self.width
            );
        }
        let mut data = Vec::with_capacity(self.channels * h * w);
        for c in 0..self.channels {
            for r in row..row + h {
                let start = (c * self.height + r) * self.width + col;
                data.extend_from_slice(&self.data[start..start + w]);
            }
        }
        Ok(Self { height: h, width: w, data, ..self.clone() })
    }
}

/// Number of STFT bins kept below `cutoff_hz`.
pub fn retained_bins(cfg: &StftConfig, sample_rate: u32, cutoff_hz: f64) -> usize {
    let bins = (cutoff_hz / cfg.bin_hz(sample_rate)).floor() as usize + 1;
    bins.min(cfg.bins())
}

fn to_db(a: f64) -> f32 {
    (20.0 * a.max(DB_EPSILON).log10()).max(DB_FLOOR) as f32
}

/// Converts a mono clip into one of the detector representations.
pub fn to_representation(clip: &AudioClip, kind: RepKind, cfg: StftConfig, cutoff_hz: f64) -> Result<SpectralRep> {
    if clip.num_channels() != 1 {
        bail!(Argument, "representations are computed from mono clips, got {} channels", clip.num_channels());
    }
    if !(cutoff_hz > 0.0) {
        bail!(Argument, "cutoff must be positive, got {cutoff_hz}");
    }
    let signal = clip.channel_f64(0);
    let sr = clip.sample_rate();
    if kind == RepKind::Waveform {
        let filtered = lowpass(&signal, cutoff_hz, sr);
        return Ok(SpectralRep {
            kind,
            channels: 1,
            height: 1,
            width: filtered.len(),
            data: filtered.iter().map(|&v| v as f32).collect(),
            config: cfg,
            freq_cutoff_hz: cutoff_hz,
            sample_rate: sr,
        });
    }
    let spec = Stft::new(cfg)?.forward(&signal)?;
    let height = retained_bins(&cfg, sr, cutoff_hz);
    let width = spec.frames;
    let plane = height * width;
    let mut data = alloc::vec![0f32; kind.channels() * plane];
    for k in 0..height {
        for t in 0..width {
            let z = spec.at(t, k);
            let i = k * width + t;
            match kind {
                RepKind::Complex => {
                    data[i] = z.re as f32;
                    data[plane + i] = z.im as f32;
                }
                RepKind::Amplitude => data[i] = to_db(z.norm()),
                RepKind::Phase => data[i] = principal_angle(z) as f32,
                RepKind::Polar => {
                    data[i] = to_db(z.norm());
                    data[plane + i] = principal_angle(z) as f32;
                }
                RepKind::Waveform => unreachable!(),
            }
        }
    }
    Ok(SpectralRep { kind, channels: kind.channels(), height, width, data, config: cfg, freq_cutoff_hz: cutoff_hz, sample_rate: sr })
}

/// Parses a comma-separated list of representation names.
pub fn parse_kinds(list: &str) -> Result<Vec<RepKind>> {
    list.split(',').map(|s| s.trim().parse()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn tone_clip(freq: f64, n: usize) -> AudioClip {
        AudioClip::mono((0..n).map(|i| (0.6 * (2.0 * PI * freq * i as f64 / 44100.0).sin()) as f32).collect(), 44100)
            .unwrap()
    }

    #[test]
    fn db_conversion_points() {
        assert_eq!(to_db(1.0), 0.0);
        assert_eq!(to_db(0.0), -100.0);
        assert_eq!(to_db(1e-9), -100.0);
        assert!((to_db(10.0) - 20.0).abs() < 1e-6);
    }

    #[test]
    fn cropped_height_matches_bin_formula() {
        let cfg = StftConfig::default();
        assert_eq!(retained_bins(&cfg, 44100, 16000.0), (16000.0f64 / (44100.0 / 2048.0)).floor() as usize + 1);
        assert_eq!(retained_bins(&cfg, 44100, 16000.0), 744);
        let rep = to_representation(&tone_clip(440.0, 35280), RepKind::Amplitude, cfg, 16000.0).unwrap();
        assert_eq!((rep.channels, rep.height, rep.width), (1, 744, 69));
    }

    #[test]
    fn phase_is_principal_and_polar_stacks_planes() {
        let clip = tone_clip(1234.0, 8192);
        let cfg = StftConfig::default();
        let amp = to_representation(&clip, RepKind::Amplitude, cfg, 16000.0).unwrap();
        let phase = to_representation(&clip, RepKind::Phase, cfg, 16000.0).unwrap();
        let polar = to_representation(&clip, RepKind::Polar, cfg, 16000.0).unwrap();
        assert!(phase.data.iter().all(|&p| p > -core::f32::consts::PI - 1e-6 && p <= core::f32::consts::PI));
        assert_eq!(polar.plane(0), amp.plane(0));
        assert_eq!(polar.plane(1), phase.plane(0));
        assert!(amp.data.iter().all(|&v| v >= -100.0));
    }

    #[test]
    fn waveform_bypasses_stft() {
        let clip = tone_clip(440.0, 4000);
        let rep = to_representation(&clip, RepKind::Waveform, StftConfig::default(), 16000.0).unwrap();
        assert_eq!((rep.height, rep.width), (1, 4000));
        let stereo = AudioClip::new(alloc::vec![alloc::vec![0.0; 10]; 2], 44100).unwrap();
        assert!(to_representation(&stereo, RepKind::Phase, StftConfig::default(), 16000.0).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in RepKind::ALL {
            assert_eq!(k.as_str().parse::<RepKind>().unwrap(), k);
        }
        assert!("mfcc".parse::<RepKind>().is_err());
        assert_eq!(parse_kinds("phase, polar").unwrap(), alloc::vec![RepKind::Phase, RepKind::Polar]);
    }
}
