use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::linalg::pseudo_inverse;
use super::Matrix;
use crate::error::{bail, Result};

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank (HTK scale, unit-peak triangles) with its
/// least-squares pseudo-inverse precomputed.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
    /// `[n_mels x bins]`, non-negative.
    pub matrix: Matrix,
    /// `[bins x n_mels]`.
    pinv: Matrix,
    rank: usize,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: u32, fmin: f64, fmax: f64) -> Result<Self> {
        let nyquist = f64::from(sample_rate) / 2.0;
        if n_mels == 0 {
            bail!(Argument, "filterbank needs at least one band");
        }
        if !(0.0..fmax).contains(&fmin) || fmax > nyquist {
            bail!(Argument, "band edges must satisfy 0 <= fmin < fmax <= {nyquist}, got {fmin}..{fmax}");
        }
        let bins = n_fft / 2 + 1;
        let bin_hz = f64::from(sample_rate) / n_fft as f64;
        let (lo, hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let mut matrix = Matrix::zeros(n_mels, bins);
        for m in 0..n_mels {
            let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
            for k in 0..bins {
                let f = k as f64 * bin_hz;
                let rising = (f - left) / (centre - left);
                let falling = (right - f) / (right - centre);
                let w = rising.min(falling);
                if w > 0.0 {
                    matrix.set(m, k, w);
                }
            }
        }
        let pinv = pseudo_inverse(&matrix);
        if pinv.is_rank_deficient() {
            log::warn!(
                "{n_mels}-band mel filterbank has numerical rank {} of {}; inversion is least-norm",
                pinv.rank,
                n_mels
            );
        }
        Ok(Self { n_mels, fmin, fmax, matrix, pinv: pinv.matrix, rank: pinv.rank })
    }

    /// Full-band filterbank for an `n_fft`-point STFT.
    pub fn full_band(n_mels: usize, n_fft: usize, sample_rate: u32) -> Result<Self> {
        Self::new(n_mels, n_fft, sample_rate, 0.0, f64::from(sample_rate) / 2.0)
    }

    pub fn bins(&self) -> usize {
        self.matrix.cols
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `[bins x frames]` linear amplitude to `[n_mels x frames]`.
    pub fn forward(&self, amplitude: &Matrix) -> Result<Matrix> {
        if amplitude.rows != self.bins() {
            bail!(Shape, "amplitude has {} bins, filterbank expects {}", amplitude.rows, self.bins());
        }
        self.matrix.matmul(amplitude)
    }

    /// Column-wise least-squares inverse, clamped to be non-negative.
    pub fn invert(&self, mel: &Matrix) -> Result<Matrix> {
        if mel.rows != self.n_mels {
            bail!(Shape, "mel input has {} bands, filterbank has {}", mel.rows, self.n_mels);
        }
        let mut out = self.pinv.matmul(mel)?;
        out.data.iter_mut().for_each(|v| *v = v.max(0.0));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn htk_scale_round_trip() {
        for hz in [0.0, 100.0, 1000.0, 8000.0, 22050.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
        assert!((hz_to_mel(1000.0) - 999.9855).abs() < 1e-3);
    }

    #[test]
    fn rows_are_contiguous_triangles_and_columns_covered() {
        let fb = MelFilterbank::full_band(64, 512, 16000).unwrap();
        for m in 0..fb.n_mels {
            let row = fb.matrix.row(m);
            let nz: Vec<usize> = (0..row.len()).filter(|&k| row[k] > 0.0).collect();
            if let (Some(&a), Some(&b)) = (nz.first(), nz.last()) {
                assert_eq!(nz.len(), b - a + 1, "band {m} not contiguous");
                let peak = (a..=b).max_by(|&x, &y| row[x].partial_cmp(&row[y]).unwrap()).unwrap();
                assert!((a..peak).all(|k| row[k] <= row[k + 1]));
                assert!((peak..b).all(|k| row[k] >= row[k + 1]));
            }
            assert!(row.iter().all(|&w| (0.0..=1.0).contains(&w)));
        }
        for k in 1..fb.bins() - 1 {
            let col: f64 = (0..fb.n_mels).map(|m| fb.matrix.get(m, k)).sum();
            assert!(col > 0.0, "bin {k} uncovered");
        }
    }

    #[test]
    fn forward_is_linear_in_single_bin() {
        let fb = MelFilterbank::full_band(32, 256, 8000).unwrap();
        let mut a = Matrix::zeros(fb.bins(), 1);
        a.set(40, 0, 3.0);
        let mel = fb.forward(&a).unwrap();
        for m in 0..fb.n_mels {
            assert!((mel.get(m, 0) - 3.0 * fb.matrix.get(m, 40)).abs() < 1e-12);
        }
        assert!(fb.forward(&Matrix::zeros(fb.bins(), 3)).unwrap().data.iter().all(|&v| v == 0.0));
        assert!(fb.forward(&Matrix::zeros(10, 3)).is_err());
    }

    #[test]
    fn invert_zero_and_clamp() {
        let fb = MelFilterbank::full_band(40, 512, 22050).unwrap();
        assert!(fb.invert(&Matrix::zeros(40, 4)).unwrap().data.iter().all(|&v| v == 0.0));
        let spiky = Matrix::from_vec(40, 1, (0..40).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect()).unwrap();
        assert!(fb.invert(&spiky).unwrap().data.iter().all(|&v| v >= 0.0));
        assert!(fb.invert(&Matrix::zeros(39, 1)).is_err());
    }
}
