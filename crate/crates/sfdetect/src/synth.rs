//! Seeded synthetic music for desk-scale experiments when no licensed
//! corpus is at hand: chord progressions on band-limited additive
//! instruments, a drum layer and a faint noise bed, panned to stereo.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use sfdetect_core::rng::{self, Rng};
use sfdetect_core::AudioClip;

use crate::audio_io::write_wav_pcm16;
use crate::error::{Error, Result};

fn gaussian(r: &mut Rng) -> f64 {
    r.sample(StandardNormal)
}

fn midi_hz(note: f64) -> f64 {
    440.0 * 2f64.powf((note - 69.0) / 12.0)
}

#[derive(Clone, Copy)]
enum Timbre {
    /// All harmonics at `1/h`, band-limited below `0.45 * sr`.
    Saw,
    /// Odd harmonics at `1/h`, band-limited below `0.45 * sr`.
    Square,
    /// Slightly inharmonic partials with fast decay.
    Bell,
}

const BELL: [(f64, f64); 4] = [(1.0, 1.0), (2.76, 0.5), (5.4, 0.3), (8.93, 0.15)];

/// `sum_h w^h sin(h phi) / h` over the retained harmonics, by the
/// Chebyshev recurrence `sin((h+1)x) = 2 cos x sin(hx) - sin((h-1)x)`.
fn harmonic_sum(phi: f64, max_h: usize, odd_only: bool, w: f64) -> f64 {
    let c2 = 2.0 * phi.cos();
    let (mut prev, mut cur) = (0.0, phi.sin());
    let (mut weight, mut sum) = (1.0, 0.0);
    for h in 1..=max_h {
        if !odd_only || h % 2 == 1 {
            sum += weight * cur / h as f64;
        }
        weight *= w;
        let next = c2 * cur - prev;
        prev = cur;
        cur = next;
    }
    sum
}

struct Voice {
    start: usize,
    len: usize,
    hz: f64,
    amp: f64,
    timbre: Timbre,
    pan: f64,
    vibrato_hz: f64,
    decay: f64,
}

fn add_voice(left: &mut [f64], right: &mut [f64], v: &Voice, sr: f64) {
    let attack = (0.01 * sr) as f64;
    let (gl, gr) = ((1.0 - v.pan).sqrt(), v.pan.sqrt());
    let max_h = ((0.45 * sr) / (v.hz * 1.004)).floor() as usize;
    let n_len = v.len.min(left.len().saturating_sub(v.start));
    let mut phi = 0.0;
    for n in 0..n_len {
        let t = n as f64 / sr;
        let env = (n as f64 / attack).min(1.0) * ((v.len - n) as f64 / attack).min(1.0) * (-t * v.decay).exp();
        phi += TAU * v.hz * (1.0 + 0.003 * (TAU * v.vibrato_hz * t).sin()) / sr;
        // Upper partials decay faster.
        let tilt = (-t * v.decay * 0.02).exp();
        let x = match v.timbre {
            Timbre::Saw => harmonic_sum(phi, max_h, false, tilt),
            Timbre::Square => harmonic_sum(phi, max_h, true, tilt),
            Timbre::Bell => BELL
                .iter()
                .enumerate()
                .filter(|(_, (ratio, _))| v.hz * ratio < 0.45 * sr)
                .map(|(j, (ratio, a))| a * (-t * v.decay * 0.3 * j as f64).exp() * (ratio * phi + j as f64 * 0.7).sin())
                .sum(),
        };
        let s = v.amp * env * x;
        left[v.start + n] += gl * s;
        right[v.start + n] += gr * s;
    }
}

/// One stereo track of `seconds` at `sample_rate`, peak 0.9.
pub fn synth_track(seed: u64, seconds: f64, sample_rate: u32) -> Result<AudioClip> {
    let sr = f64::from(sample_rate);
    let n = (seconds * sr).round() as usize;
    if n == 0 {
        return Err(Error::Config("synthetic tracks need a positive duration".into()));
    }
    let mut r = rng::derive_rng(seed, "synth-track", 0);
    let (mut left, mut right) = (vec![0.0; n], vec![0.0; n]);
    let beat = 60.0 / r.random_range(80.0..150.0);
    let beat_len = (beat * sr) as usize;
    let root = f64::from(r.random_range(45u8..57));
    let minor = r.random_bool(0.5);
    let third = if minor { 3.0 } else { 4.0 };
    let progression: Vec<f64> = (0..4).map(|_| [0.0, 5.0, 7.0, 9.0, 2.0][r.random_range(0..5)]).collect();
    let timbres = [Timbre::Saw, Timbre::Square, Timbre::Bell];
    let pads = timbres[r.random_range(0..3)];
    let lead = timbres[r.random_range(0..3)];
    let pan_pad = r.random_range(0.2..0.8);
    let pan_lead = r.random_range(0.1..0.9);

    let bar = 4 * beat_len;
    let mut start = 0;
    let mut chord = 0;
    while start < n {
        let degree = root + progression[chord % progression.len()];
        for interval in [0.0, third, 7.0] {
            add_voice(
                &mut left,
                &mut right,
                &Voice {
                    start,
                    len: bar,
                    hz: midi_hz(degree + interval),
                    amp: 0.12,
                    timbre: pads,
                    pan: pan_pad,
                    vibrato_hz: 5.0,
                    decay: 0.6,
                },
                sr,
            );
        }
        let scale = if minor { [0.0, 2.0, 3.0, 5.0, 7.0, 8.0, 10.0] } else { [0.0, 2.0, 4.0, 5.0, 7.0, 9.0, 11.0] };
        let mut t = start;
        while t < (start + bar).min(n) {
            let len = beat_len / [1, 2, 2, 4][r.random_range(0..4)];
            if r.random_bool(0.8) {
                let note = degree + 12.0 + scale[r.random_range(0..scale.len())];
                add_voice(
                    &mut left,
                    &mut right,
                    &Voice { start: t, len, hz: midi_hz(note), amp: 0.1, timbre: lead, pan: pan_lead, vibrato_hz: 6.0, decay: 3.0 },
                    sr,
                );
            }
            t += len;
        }
        start += bar;
        chord += 1;
    }

    // Kick on every beat, hi-hat on off-beats.
    let mut t = 0;
    while t < n {
        let kick = (0.25 * sr) as usize;
        let mut phase = 0.0;
        for i in 0..kick.min(n - t) {
            let x = i as f64 / sr;
            phase += TAU * (50.0 + 90.0 * (-x * 30.0).exp()) / sr;
            let s = 0.35 * (-x * 14.0).exp() * phase.sin();
            left[t + i] += s;
            right[t + i] += s;
        }
        let hat = t + beat_len / 2;
        let mut prev = 0.0;
        for i in 0..((0.05 * sr) as usize).min(n.saturating_sub(hat)) {
            let w = gaussian(&mut r);
            let s = 0.05 * (-(i as f64) / sr * 80.0).exp() * (w - prev);
            prev = w;
            left[hat + i] += 0.7 * s;
            right[hat + i] += 1.3 * s;
        }
        if (t / beat_len.max(1)) % 2 == 1 {
            let mut tone = 0.0;
            for i in 0..((0.15 * sr) as usize).min(n - t) {
                let x = i as f64 / sr;
                tone += TAU * 185.0 / sr;
                let s = (-x * 25.0).exp() * (0.08 * gaussian(&mut r) + 0.1 * tone.sin());
                left[t + i] += s;
                right[t + i] += s;
            }
        }
        t += beat_len;
    }
    for (l, rr) in left.iter_mut().zip(right.iter_mut()) {
        *l += 0.003 * gaussian(&mut r);
        *rr += 0.003 * gaussian(&mut r);
    }
    let peak = left.iter().chain(&right).fold(0f64, |m, v| m.max(v.abs())).max(1e-9);
    let scale = 0.9 / peak;
    left.iter_mut().chain(right.iter_mut()).for_each(|v| *v *= scale);
    Ok(AudioClip::from_f64(&[left, right], sample_rate)?)
}

/// Writes `n` tracks as 16-bit WAVs named `synth_0000.wav`, ... into `dir`.
pub fn write_corpus(dir: &Path, n: usize, seconds: f64, seed: u64, sample_rate: u32) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let path = dir.join(format!("synth_{i:04}.wav"));
            write_wav_pcm16(&path, &synth_track(rng::derive(seed, "synth-corpus", i as u64), seconds, sample_rate)?)?;
            Ok(path)
        })
        .collect()
}
