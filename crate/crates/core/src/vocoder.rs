//! Phase vocoder with identity phase locking, shared by time stretching and
//! pitch shifting.
//!
//! Synthesis frames sit on a fixed hop; analysis frames are read at
//! `hop * rate`. Spectral peaks advance their phase by the instantaneous
//! frequency measured between consecutive analysis frames, and every other
//! bin keeps its analysis phase offset relative to the peak whose region it
//! falls in.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::audio::Resampler;
use crate::dsp::Window;
use crate::error::{bail, Result};
use crate::fft::RealFft;

fn princarg(phi: f64) -> f64 {
    phi - 2.0 * PI * ((phi + PI) / (2.0 * PI)).floor()
}

#[derive(Debug, Clone)]
pub struct PhaseVocoder {
    n_fft: usize,
    hop: usize,
    fft: RealFft,
    window: Vec<f64>,
}

impl Default for PhaseVocoder {
    fn default() -> Self {
        Self::new(4096, 512).expect("valid default geometry")
    }
}

impl PhaseVocoder {
    pub fn new(n_fft: usize, hop: usize) -> Result<Self> {
        if hop == 0 || hop * 2 > n_fft {
            bail!(Config, "phase vocoder hop must be in 1..=n_fft/2, got {hop}");
        }
        Ok(Self { n_fft, hop, fft: RealFft::new(n_fft)?, window: Window::Hann.coefficients(n_fft) })
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    /// Changes duration by `1 / rate` (rate 1.25 shortens 10 s to 8 s)
    /// while preserving pitch.
    pub fn stretch(&self, x: &[f64], rate: f64) -> Result<Vec<f64>> {
        if !(rate > 0.0) || !rate.is_finite() {
            bail!(Argument, "stretch rate must be positive, got {rate}");
        }
        if x.is_empty() {
            return Ok(Vec::new());
        }
        let n = self.n_fft;
        let half = n / 2;
        let bins = half + 1;
        let out_len = ((x.len() as f64 / rate).round() as usize).max(1);
        let frames = out_len.div_ceil(self.hop) + 1;

        let mut acc = vec![0.0; (frames - 1) * self.hop + n];
        let mut env = vec![0.0; acc.len()];
        let mut buf = vec![0.0; n];
        let mut spec = vec![Complex64::default(); bins];
        let mut scratch = vec![Complex64::default(); half];
        let mut mag = vec![0.0; bins];
        let mut phase = vec![0.0; bins];
        let mut prev_phase = vec![0.0; bins];
        let mut out_phase = vec![0.0; bins];
        let mut peaks: Vec<usize> = Vec::with_capacity(bins);
        let omega: Vec<f64> = (0..bins).map(|k| 2.0 * PI * k as f64 / n as f64).collect();
        let position = |m: usize| (m as f64 * self.hop as f64 * rate).round() as isize;

        let analyze = |pos: isize, buf: &mut [f64], spec: &mut [Complex64], scratch: &mut [Complex64], mag: &mut [f64], phase: &mut [f64]| {
            for (i, b) in buf.iter_mut().enumerate() {
                let idx = pos - half as isize + i as isize;
                *b = if idx >= 0 && (idx as usize) < x.len() { x[idx as usize] * self.window[i] } else { 0.0 };
            }
            self.fft.forward(buf, spec, scratch);
            for k in 0..bins {
                mag[k] = spec[k].norm();
                phase[k] = spec[k].im.atan2(spec[k].re);
            }
        };
        let inst_freq = |k: usize, cur: f64, prev: f64, dt: f64| -> f64 {
            if dt > 0.0 {
                omega[k] + princarg(cur - prev - omega[k] * dt) / dt
            } else {
                omega[k]
            }
        };

        // Frames whose window hangs over the start have biased phases; the
        // opening frames take their phase from the first full-window frame,
        // extrapolated along its instantaneous frequency.
        let mut anchor = (0..frames).find(|&m| position(m) >= half as isize).unwrap_or(0);
        if rate == 1.0 || position(anchor + 1) + half as isize > x.len() as isize {
            anchor = 0;
        }
        let mut anchor_phase = vec![0.0; bins];
        let mut anchor_freq = vec![0.0; bins];
        if anchor > 0 {
            analyze(position(anchor), &mut buf, &mut spec, &mut scratch, &mut mag, &mut anchor_phase);
            analyze(position(anchor + 1), &mut buf, &mut spec, &mut scratch, &mut mag, &mut phase);
            let dt = (position(anchor + 1) - position(anchor)) as f64;
            for k in 0..bins {
                anchor_freq[k] = inst_freq(k, phase[k], anchor_phase[k], dt);
            }
        }

        let mut prev_pos = 0isize;
        for m in 0..frames {
            let pos = position(m);
            analyze(pos, &mut buf, &mut spec, &mut scratch, &mut mag, &mut phase);

            if m == 0 && anchor == 0 {
                out_phase.copy_from_slice(&phase);
            } else if m <= anchor {
                let shift = (m * self.hop) as f64 - position(anchor) as f64;
                for k in 0..bins {
                    out_phase[k] = anchor_phase[k] + anchor_freq[k] * shift;
                }
            } else {
                let dt = (pos - prev_pos) as f64;
                let advance = |k: usize, prev_out: f64| prev_out + inst_freq(k, phase[k], prev_phase[k], dt) * self.hop as f64;
                let max_mag = mag.iter().cloned().fold(0.0, f64::max);
                peaks.clear();
                for k in 0..bins {
                    let lo = k.saturating_sub(2);
                    let hi = (k + 2).min(bins - 1);
                    if mag[k] > 1e-12 * max_mag && (lo..=hi).all(|j| j == k || mag[k] > mag[j]) {
                        peaks.push(k);
                    }
                }
                if peaks.is_empty() {
                    for k in 0..bins {
                        out_phase[k] = advance(k, out_phase[k]);
                    }
                } else {
                    let locked: Vec<(usize, f64)> = peaks.iter().map(|&p| (p, advance(p, out_phase[p]))).collect();
                    let mut region = 0;
                    for k in 0..bins {
                        while region + 1 < locked.len() && k > (locked[region].0 + locked[region + 1].0) / 2 {
                            region += 1;
                        }
                        let (p, p_out) = locked[region];
                        out_phase[k] = if k == p { p_out } else { p_out + phase[k] - phase[p] };
                    }
                }
            }
            prev_phase.copy_from_slice(&phase);
            prev_pos = pos;

            for k in 0..bins {
                spec[k] = Complex64::from_polar(mag[k], out_phase[k]);
            }
            self.fft.inverse(&spec, &mut buf, &mut scratch);
            let start = m * self.hop;
            for i in 0..n {
                acc[start + i] += buf[i] * self.window[i];
                env[start + i] += self.window[i] * self.window[i];
            }
        }
        let mut out = vec![0.0; out_len];
        for (i, o) in out.iter_mut().enumerate() {
            let j = i + half;
            if j >= half && env[j] > 1e-10 {
                *o = acc[j] / env[j];
            }
        }
        Ok(out)
    }

    /// Scales every frequency by `2^(semitones/12)` at constant duration:
    /// stretch by the ratio, then resample back to the input length.
    pub fn pitch_shift(&self, x: &[f64], semitones: f64) -> Result<Vec<f64>> {
        if !semitones.is_finite() {
            bail!(Argument, "semitone shift must be finite");
        }
        let ratio = 2f64.powf(semitones / 12.0);
        let stretched = self.stretch(x, 1.0 / ratio)?;
        Ok(Resampler::default().process(&stretched, ratio, x.len()))
    }
}
