//! Measurement primitives: thresholded accuracy tables, Wilson intervals,
//! reliability curves, fade-mixing curves and sliding-window attribution.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::dataset::DecoderId;
use crate::error::{bail, Result};
use crate::net::Tensor;

/// Default decision threshold.
pub const THRESHOLD: f64 = 0.5;
/// Two-sided 95 % normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Fake iff `p_fake >= threshold` (ties go to fake).
pub fn predicts_fake(p_fake: f64, threshold: f64) -> bool {
    p_fake >= threshold
}

/// Wilson score interval for `successes` out of `n` (fractional successes
/// allowed). `None` when `n == 0`.
pub fn wilson(successes: f64, n: usize, z: f64) -> Option<(f64, f64)> {
    if n == 0 {
        return None;
    }
    let n = n as f64;
    let p = (successes / n).clamp(0.0, 1.0);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Some(((centre - half).max(0.0), (centre + half).min(1.0)))
}

/// One scored excerpt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub decoder: DecoderId,
    pub p_fake: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub decoder: DecoderId,
    pub n: usize,
    pub correct: usize,
    /// `None` when the class has no samples.
    pub accuracy: Option<f64>,
}

/// Per-class accuracy: specificity for the real class, recall for fakes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub per_class: Vec<ClassRow>,
    pub overall: Option<f64>,
    pub n_total: usize,
    pub threshold: f64,
}

impl ClassAccuracy {
    /// Rows follow `classes`; predictions of unlisted classes are still
    /// counted in extra rows appended in first-seen order.
    pub fn from_scores(scores: &[Scored], classes: &[DecoderId], threshold: f64) -> Self {
        let mut rows: Vec<ClassRow> =
            classes.iter().map(|d| ClassRow { decoder: d.clone(), n: 0, correct: 0, accuracy: None }).collect();
        for s in scores {
            let idx = match rows.iter().position(|r| r.decoder == s.decoder) {
                Some(i) => i,
                None => {
                    rows.push(ClassRow { decoder: s.decoder.clone(), n: 0, correct: 0, accuracy: None });
                    rows.len() - 1
                }
            };
            rows[idx].n += 1;
            if predicts_fake(s.p_fake, threshold) == !s.decoder.is_real() {
                rows[idx].correct += 1;
            }
        }
        for r in &mut rows {
            r.accuracy = (r.n > 0).then(|| r.correct as f64 / r.n as f64);
        }
        let n_total: usize = rows.iter().map(|r| r.n).sum();
        let correct: usize = rows.iter().map(|r| r.correct).sum();
        Self { per_class: rows, overall: (n_total > 0).then(|| correct as f64 / n_total as f64), n_total, threshold }
    }

    pub fn get(&self, decoder: &DecoderId) -> Option<f64> {
        self.per_class.iter().find(|r| &r.decoder == decoder).and_then(|r| r.accuracy)
    }
}

/// What a reliability bin measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationScoring {
    /// Fraction of bin members whose label matches the predicted class,
    /// against the mean confidence `max(p, 1 - p)`.
    #[default]
    LabelAgreement,
    /// Fraction of bin members that are fake, against the mean `p_fake`.
    FakeFrequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub mean_predicted: Option<f64>,
    /// Diagonal reference for the scoring mode.
    pub expected: Option<f64>,
    pub empirical_accuracy: Option<f64>,
    pub ci95_low: Option<f64>,
    pub ci95_high: Option<f64>,
}

impl CalibrationBin {
    /// Whether the diagonal reference lies inside the Wilson interval.
    pub fn covers_diagonal(&self) -> Option<bool> {
        Some((self.ci95_low?..=self.ci95_high?).contains(&self.expected?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub scoring: CalibrationScoring,
    pub bins: Vec<CalibrationBin>,
    pub total: usize,
}

pub const CALIBRATION_BINS: usize = 10;
/// Minimum number of predictions for a calibration curve.
pub const MIN_CALIBRATION_PREDICTIONS: usize = 100;

impl CalibrationCurve {
    /// Ten equal-width bins over `p_fake`; `is_fake` holds the labels.
    pub fn from_predictions(p_fake: &[f64], is_fake: &[bool], scoring: CalibrationScoring) -> Result<Self> {
        if p_fake.len() != is_fake.len() {
            bail!(Shape, "{} predictions but {} labels", p_fake.len(), is_fake.len());
        }
        if p_fake.len() < MIN_CALIBRATION_PREDICTIONS {
            bail!(Length, "calibration needs at least {MIN_CALIBRATION_PREDICTIONS} predictions, got {}", p_fake.len());
        }
        if p_fake.iter().any(|p| !(0.0..=1.0).contains(p)) {
            bail!(Argument, "probabilities must lie in [0, 1]");
        }
        let n_bins = CALIBRATION_BINS;
        let mut count = vec![0usize; n_bins];
        let mut sum_p = vec![0.0; n_bins];
        let mut sum_ref = vec![0.0; n_bins];
        let mut hits = vec![0usize; n_bins];
        for (&p, &fake) in p_fake.iter().zip(is_fake) {
            let b = ((p * n_bins as f64).floor() as usize).min(n_bins - 1);
            count[b] += 1;
            sum_p[b] += p;
            let predicted_fake = predicts_fake(p, THRESHOLD);
            let (reference, hit) = match scoring {
                CalibrationScoring::LabelAgreement => (p.max(1.0 - p), predicted_fake == fake),
                CalibrationScoring::FakeFrequency => (p, fake),
            };
            sum_ref[b] += reference;
            hits[b] += usize::from(hit);
        }
        let bins = (0..n_bins)
            .map(|b| {
                let n = count[b];
                let ci = wilson(hits[b] as f64, n, Z95);
                CalibrationBin {
                    lower: b as f64 / n_bins as f64,
                    upper: (b + 1) as f64 / n_bins as f64,
                    count: n,
                    mean_predicted: (n > 0).then(|| sum_p[b] / n as f64),
                    expected: (n > 0).then(|| sum_ref[b] / n as f64),
                    empirical_accuracy: (n > 0).then(|| hits[b] as f64 / n as f64),
                    ci95_low: ci.map(|c| c.0),
                    ci95_high: ci.map(|c| c.1),
                }
            })
            .collect();
        Ok(Self { scoring, bins, total: p_fake.len() })
    }

    /// `(covered, populated)` bins.
    pub fn diagonal_coverage(&self) -> (usize, usize) {
        let flags: Vec<bool> = self.bins.iter().filter_map(CalibrationBin::covers_diagonal).collect();
        (flags.iter().filter(|&&f| f).count(), flags.len())
    }
}

/// Default fading grid `{0.0, 0.1, ..., 1.0}`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=10).map(|i| f64::from(i) / 10.0).collect()
}

pub fn validate_lambda_grid(grid: &[f64]) -> Result<()> {
    if grid.first() != Some(&0.0) || grid.last() != Some(&1.0) {
        bail!(Argument, "lambda grid must start at 0 and end at 1");
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        bail!(Argument, "lambda grid must be strictly increasing");
    }
    Ok(())
}

/// `normalize((1 - lambda) * real + lambda * fake)` for equal-length mono
/// excerpts that are already peak-normalized. The endpoints return the
/// corresponding input unchanged.
pub fn mix_excerpts(real: &AudioClip, fake: &AudioClip, lambda: f64) -> Result<AudioClip> {
    if !(0.0..=1.0).contains(&lambda) {
        bail!(Argument, "mixing factor {lambda} outside [0, 1]");
    }
    if real.frames() != fake.frames() || real.num_channels() != fake.num_channels() || real.sample_rate() != fake.sample_rate() {
        bail!(Shape, "mixed excerpts must share length, channel count and rate");
    }
    if lambda == 0.0 {
        return Ok(real.clone());
    }
    if lambda == 1.0 {
        return Ok(fake.clone());
    }
    let mixed = real.map_channels(|c, r| {
        let f = fake.channel(c);
        Ok(r.iter().zip(f).map(|(&a, &b)| (1.0 - lambda) * a + lambda * f64::from(b)).collect())
    })?;
    Ok(mixed.peak_normalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixPoint {
    pub lambda: f64,
    pub n_mixes: usize,
    pub mean_p_fake: Option<f64>,
    /// Wilson interval of the mean probability (fractional successes).
    pub ci95_low: Option<f64>,
    pub ci95_high: Option<f64>,
    /// Share of mixes classified fake at the default threshold.
    pub frac_predicted_fake: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixCurve {
    pub points: Vec<MixPoint>,
    /// Pairs left out because their lengths disagree, with the reason.
    pub skipped: Vec<String>,
}

impl MixCurve {
    /// `predictions[i]` holds every mix's `p_fake` at `lambdas[i]`.
    pub fn from_predictions(lambdas: &[f64], predictions: &[Vec<f64>], skipped: Vec<String>) -> Result<Self> {
        validate_lambda_grid(lambdas)?;
        if lambdas.len() != predictions.len() {
            bail!(Shape, "{} lambdas but {} prediction sets", lambdas.len(), predictions.len());
        }
        let points = lambdas
            .iter()
            .zip(predictions)
            .map(|(&lambda, ps)| {
                let n = ps.len();
                let sum: f64 = ps.iter().sum();
                let ci = wilson(sum, n, Z95);
                MixPoint {
                    lambda,
                    n_mixes: n,
                    mean_p_fake: (n > 0).then(|| sum / n as f64),
                    ci95_low: ci.map(|c| c.0),
                    ci95_high: ci.map(|c| c.1),
                    frac_predicted_fake: (n > 0).then(|| ps.iter().filter(|&&p| predicts_fake(p, THRESHOLD)).count() as f64 / n as f64),
                }
            })
            .collect();
        Ok(Self { points, skipped })
    }
}

/// Generalization matrix: row `i` is the model trained on `decoders[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationMatrix {
    pub decoders: Vec<DecoderId>,
    /// `recall[i][j]`: fake recall of model `i` on decoder `j`.
    pub recall: Vec<Vec<Option<f64>>>,
    pub real_specificity: Vec<Option<f64>>,
    /// Training or evaluation failure of each row.
    pub errors: Vec<Option<String>>,
}

impl GeneralizationMatrix {
    pub fn new(decoders: Vec<DecoderId>) -> Self {
        let n = decoders.len();
        Self { decoders, recall: vec![vec![None; n]; n], real_specificity: vec![None; n], errors: vec![None; n] }
    }

    pub fn set_row(&mut self, row: usize, accuracy: &ClassAccuracy) {
        for j in 0..self.decoders.len() {
            self.recall[row][j] = accuracy.get(&self.decoders[j]);
        }
        self.real_specificity[row] = accuracy.get(&DecoderId::real());
    }

    pub fn diagonal(&self) -> Vec<Option<f64>> {
        (0..self.decoders.len()).map(|i| self.recall[i][i]).collect()
    }
}

/// Per-patch `p_fake` over a sliding window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionMap {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `[rows x cols]`.
    pub values: Vec<f64>,
    pub patch_size: usize,
    pub stride: usize,
    pub source: String,
    pub source_height: usize,
    pub source_width: usize,
}

impl AttributionMap {
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    /// Top-left pixel of patch `(r, c)`.
    pub fn origin(&self, r: usize, c: usize) -> (usize, usize) {
        (r * self.stride, c * self.stride)
    }
}

/// `floor((dim - patch) / stride) + 1`.
pub fn grid_len(dim: usize, patch: usize, stride: usize) -> Result<usize> {
    if stride == 0 || patch == 0 {
        bail!(Argument, "patch and stride must be positive");
    }
    if dim < patch {
        bail!(Length, "dimension {dim} smaller than patch {patch}");
    }
    Ok((dim - patch) / stride + 1)
}

/// Runs `predict` on every `patch x patch` window at `stride`.
pub fn attribution_map<F>(spec: &Tensor<f32>, patch: usize, stride: usize, source: &str, mut predict: F) -> Result<AttributionMap>
where
    F: FnMut(&Tensor<f32>) -> Result<f64>,
{
    let rows = grid_len(spec.height, patch, stride)?;
    let cols = grid_len(spec.width, patch, stride)?;
    let mut values = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let p = predict(&spec.crop(r * stride, c * stride, patch, patch)?)?;
            if !(0.0..=1.0).contains(&p) {
                bail!(Argument, "patch prediction {p} outside [0, 1]");
            }
            values.push(p);
        }
    }
    Ok(AttributionMap {
        rows,
        cols,
        values,
        patch_size: patch,
        stride,
        source: String::from(source),
        source_height: spec.height,
        source_width: spec.width,
    })
}
