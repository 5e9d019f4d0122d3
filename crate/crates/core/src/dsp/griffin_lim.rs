use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng as _;

use super::{Matrix, Spectrogram, Stft};
use crate::error::{bail, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GriffinLimConfig {
    pub n_iter: usize,
    /// Fast Griffin-Lim extrapolation factor; `0.0` is the classic algorithm.
    pub momentum: f64,
}

impl Default for GriffinLimConfig {
    fn default() -> Self {
        Self { n_iter: 32, momentum: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct GriffinLimOutput {
    pub signal: Vec<f64>,
    /// Spectral convergence after each iteration:
    /// `|| |STFT(x_k)| - target ||_F / ||target||_F`.
    pub errors: Vec<f64>,
}

/// Squared Frobenius norm over the full (Hermitian-completed) spectrum.
fn full_weight(k: usize, bins: usize) -> f64 {
    if k == 0 || k + 1 == bins {
        1.0
    } else {
        2.0
    }
}

/// Recovers a signal of `length` samples whose STFT magnitude approximates
/// `target` (`[bins x frames]`, linear amplitude) by alternating projections
/// from a seeded uniform random phase.
pub fn griffin_lim(
    target: &Matrix,
    stft: &Stft,
    length: usize,
    cfg: GriffinLimConfig,
    seed: u64,
) -> Result<GriffinLimOutput> {
    if cfg.n_iter == 0 {
        bail!(Argument, "Griffin-Lim needs at least one iteration");
    }
    let bins = stft.config().bins();
    if target.rows != bins {
        bail!(Shape, "target has {} bins, STFT produces {bins}", target.rows);
    }
    let frames = match stft.config().frames_for(length) {
        Some(f) => f,
        None => bail!(Length, "length {length} too short for the STFT"),
    };
    if target.cols != frames {
        bail!(Shape, "target has {} frames, a {length}-sample signal has {frames}", target.cols);
    }
    if target.data.iter().any(|&a| !(a >= 0.0) || !a.is_finite()) {
        bail!(Argument, "target magnitudes must be finite and non-negative");
    }

    // Frame-major copy of the target for the inner loop.
    let mut mag = alloc::vec![0.0; bins * frames];
    let mut norm2 = 0.0;
    for k in 0..bins {
        for t in 0..frames {
            let a = target.get(k, t);
            mag[t * bins + k] = a;
            norm2 += full_weight(k, bins) * a * a;
        }
    }
    let norm = norm2.sqrt();

    let mut r = rng::rng_from(seed);
    let mut estimate = Spectrogram::zeros(bins, frames);
    for (z, &a) in estimate.data.iter_mut().zip(&mag) {
        let phi: f64 = r.random_range(-PI..PI);
        *z = Complex64::from_polar(a, phi);
    }

    let mut previous: Option<Spectrogram> = None;
    let mut errors = Vec::with_capacity(cfg.n_iter);
    let mut signal = Vec::new();
    for _ in 0..cfg.n_iter {
        signal = stft.inverse(&estimate, length)?;
        let rebuilt = stft.forward(&signal)?;
        let mut err2 = 0.0;
        for t in 0..frames {
            for k in 0..bins {
                let d = rebuilt.data[t * bins + k].norm() - mag[t * bins + k];
                err2 += full_weight(k, bins) * d * d;
            }
        }
        errors.push(if norm > 0.0 { err2.sqrt() / norm } else { 0.0 });

        let mut projected = rebuilt.clone();
        if cfg.momentum != 0.0 {
            if let Some(prev) = &previous {
                for (z, p) in projected.data.iter_mut().zip(&prev.data) {
                    *z += (*z - p) * cfg.momentum;
                }
            }
            previous = Some(rebuilt);
        }
        for ((z, p), &a) in estimate.data.iter_mut().zip(&projected.data).zip(&mag) {
            let n = p.norm();
            *z = if n > 0.0 { p * (a / n) } else { Complex64::new(a, 0.0) };
        }
    }
    Ok(GriffinLimOutput { signal, errors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::StftConfig;

    fn music_like(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let t = i as f64 / 22050.0;
                0.4 * (2.0 * PI * 220.0 * t).sin() + 0.2 * (2.0 * PI * 661.0 * t).sin() * (1.0 - t)
                    + 0.1 * (2.0 * PI * 1500.0 * t * (1.0 + 0.1 * t)).sin()
            })
            .collect()
    }

    fn setup() -> (Stft, Vec<f64>, Matrix) {
        let stft = Stft::new(StftConfig { n_fft: 512, hop: 128, ..Default::default() }).unwrap();
        let x = music_like(8000);
        let target = stft.forward(&x).unwrap().magnitude();
        (stft, x, target)
    }

    #[test]
    fn error_sequence_is_non_increasing() {
        let (stft, x, target) = setup();
        let out = griffin_lim(&target, &stft, x.len(), GriffinLimConfig::default(), 1).unwrap();
        assert_eq!(out.errors.len(), 32);
        for w in out.errors.windows(2) {
            assert!(w[1] <= w[0] + 1e-6, "{:?}", out.errors);
        }
        assert!(out.errors[31] < out.errors[0]);
    }

    #[test]
    fn zero_target_gives_zero_signal() {
        let (stft, x, target) = setup();
        let zero = Matrix::zeros(target.rows, target.cols);
        let out = griffin_lim(&zero, &stft, x.len(), GriffinLimConfig { n_iter: 1, momentum: 0.0 }, 3).unwrap();
        assert!(out.signal.iter().all(|&v| v == 0.0));
        assert_eq!(out.errors, alloc::vec![0.0]);
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let (stft, x, target) = setup();
        let cfg = GriffinLimConfig { n_iter: 4, momentum: 0.0 };
        let a = griffin_lim(&target, &stft, x.len(), cfg, 9).unwrap();
        let b = griffin_lim(&target, &stft, x.len(), cfg, 9).unwrap();
        assert_eq!(a.signal, b.signal);
        let c = griffin_lim(&target, &stft, x.len(), cfg, 10).unwrap();
        assert_ne!(a.signal, c.signal);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (stft, x, target) = setup();
        let cfg = GriffinLimConfig { n_iter: 0, momentum: 0.0 };
        assert!(griffin_lim(&target, &stft, x.len(), cfg, 0).is_err());
        assert!(griffin_lim(&target, &stft, x.len() + 1000, GriffinLimConfig::default(), 0).is_err());
    }

    #[test]
    fn momentum_variant_converges_too() {
        let (stft, x, target) = setup();
        let out = griffin_lim(&target, &stft, x.len(), GriffinLimConfig { n_iter: 32, momentum: 0.99 }, 1).unwrap();
        assert!(out.errors[31] < out.errors[0]);
    }
}
