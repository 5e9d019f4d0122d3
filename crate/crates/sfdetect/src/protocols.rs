//! Measurement protocols over a manifest: accuracy, robustness,
//! generalization, calibration, fade mixing and attribution.
//!
//! Excerpt `k` of track `t` always uses the seed
//! `derive(seed, "eval-excerpt/<t>", k)`, so every protocol (and every
//! manipulation column) sees the same excerpt positions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sfdetect_core::dataset::{DecoderId, Manifest, Split, TrackRecord, MAX_PAIR_MISMATCH_S};
use sfdetect_core::eval::{
    attribution_map, mix_excerpts, validate_lambda_grid, AttributionMap, CalibrationCurve, CalibrationScoring,
    ClassAccuracy, GeneralizationMatrix, MixCurve, Scored, THRESHOLD,
};
use sfdetect_core::manipulate::{Manipulation, ManipulationKind, Reencoder};
use sfdetect_core::net::{ArchSpec, ModelParams, TrainConfig};
use sfdetect_core::{rng, AudioClip};

use crate::error::{Error, Result};
use crate::pipeline::{predict_clip, ClipStore, FrontEnd, DEFAULT_EXCERPT_S, EVAL_MONO_ALPHA};
use crate::train::train;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub split: Split,
    pub excerpts_per_track: usize,
    pub excerpt_s: f64,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { split: Split::Test, excerpts_per_track: 1, excerpt_s: DEFAULT_EXCERPT_S, seed: 0, threshold: THRESHOLD }
    }
}

impl EvalOptions {
    pub fn validate(&self) -> Result<()> {
        if self.excerpts_per_track == 0 {
            return Err(Error::Config("excerpts_per_track must be positive".into()));
        }
        if !(self.excerpt_s > 0.0) {
            return Err(Error::Config("excerpt_s must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        Ok(())
    }

    pub fn excerpt_seed(&self, track_id: &str, k: usize) -> u64 {
        rng::derive(self.seed, &format!("eval-excerpt/{track_id}"), k as u64)
    }
}

/// Real class followed by the manifest's decoders.
pub fn eval_classes(manifest: &Manifest) -> Vec<DecoderId> {
    std::iter::once(DecoderId::real()).chain(manifest.decoders.iter().cloned()).collect()
}

fn split_records<'a>(manifest: &'a Manifest, split: Split) -> Vec<&'a TrackRecord> {
    manifest.records.iter().filter(|r| r.split == split && !r.is_placeholder()).collect()
}

/// Scores every excerpt of `records` after `manipulation(record)` is
/// applied to the whole track.
fn score_records<M>(
    params: &ModelParams,
    store: &ClipStore,
    front: &FrontEnd,
    records: &[&TrackRecord],
    opts: &EvalOptions,
    manipulation: M,
    reencoder: Option<&(dyn Reencoder + Sync)>,
) -> Result<Vec<Scored>>
where
    M: Fn(&TrackRecord) -> Manipulation + Sync,
{
    opts.validate()?;
    let per_track: Vec<Vec<Scored>> = records
        .par_iter()
        .map(|record| {
            let clip = store.get(record)?;
            let clip = manipulation(record).apply(&clip, reencoder.map(|r| r as &dyn Reencoder))?;
            (0..opts.excerpts_per_track)
                .map(|k| {
                    let ex = front.excerpt(&clip, opts.excerpt_s, opts.excerpt_seed(&record.track_id, k), EVAL_MONO_ALPHA)?;
                    Ok(Scored { decoder: record.decoder.clone(), p_fake: predict_clip(params, front, &ex)? })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_track.into_iter().flatten().collect())
}

fn require_records(records: &[&TrackRecord], split: Split) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Core(sfdetect_core::Error::Dataset(format!("no resolved records in the {} split", split.as_str()))));
    }
    Ok(())
}

/// Thresholded per-class accuracy over a split.
pub fn evaluate_accuracy(params: &ModelParams, manifest: &Manifest, store: &ClipStore, front: &FrontEnd, opts: &EvalOptions) -> Result<ClassAccuracy> {
    let records = split_records(manifest, opts.split);
    require_records(&records, opts.split)?;
    let scores = score_records(params, store, front, &records, opts, |_| Manipulation::Identity, None)?;
    Ok(ClassAccuracy::from_scores(&scores, &eval_classes(manifest), opts.threshold))
}

/// Parameters drawn for one track of a robustness column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackManipulation {
    pub track_id: String,
    pub manipulation: Manipulation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ColumnOutcome {
    Done { accuracy: ClassAccuracy },
    Skipped { reason: String },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessColumn {
    pub manipulation: String,
    pub outcome: ColumnOutcome,
    pub parameters: Vec<TrackManipulation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessTable {
    pub classes: Vec<DecoderId>,
    /// `identity` first, then the requested manipulations.
    pub columns: Vec<RobustnessColumn>,
}

impl RobustnessTable {
    pub fn column(&self, name: &str) -> Option<&RobustnessColumn> {
        self.columns.iter().find(|c| c.manipulation == name)
    }
}

/// Parameters of `kind` for one track.
pub fn track_manipulation(kind: ManipulationKind, seed: u64, track_id: &str) -> Manipulation {
    Manipulation::sample(kind, rng::derive(seed, &format!("manip/{}/{track_id}", kind.as_str()), 0))
}

/// One accuracy table per manipulation. Each track is manipulated as a
/// whole before the usual excerpts are drawn; codec columns are skipped
/// without a transcoder.
pub fn robustness_table(
    params: &ModelParams,
    manifest: &Manifest,
    store: &ClipStore,
    front: &FrontEnd,
    kinds: &[ManipulationKind],
    reencoder: Option<&(dyn Reencoder + Sync)>,
    opts: &EvalOptions,
) -> Result<RobustnessTable> {
    let records = split_records(manifest, opts.split);
    require_records(&records, opts.split)?;
    let classes = eval_classes(manifest);
    let mut columns = Vec::new();
    let identity = score_records(params, store, front, &records, opts, |_| Manipulation::Identity, None)?;
    columns.push(RobustnessColumn {
        manipulation: "identity".into(),
        outcome: ColumnOutcome::Done { accuracy: ClassAccuracy::from_scores(&identity, &classes, opts.threshold) },
        parameters: Vec::new(),
    });
    for &kind in kinds {
        let parameters: Vec<TrackManipulation> = records
            .iter()
            .map(|r| TrackManipulation { track_id: r.track_id.clone(), manipulation: track_manipulation(kind, opts.seed, &r.track_id) })
            .collect();
        let outcome = if kind.needs_transcoder() && reencoder.is_none() {
            ColumnOutcome::Skipped { reason: "no transcoder configured".into() }
        } else {
            match score_records(params, store, front, &records, opts, |r| track_manipulation(kind, opts.seed, &r.track_id), reencoder) {
                Ok(scores) => ColumnOutcome::Done { accuracy: ClassAccuracy::from_scores(&scores, &classes, opts.threshold) },
                Err(e) => {
                    log::warn!("{} column failed: {e}", kind.as_str());
                    ColumnOutcome::Failed { reason: e.to_string() }
                }
            }
        };
        columns.push(RobustnessColumn { manipulation: kind.as_str().into(), outcome, parameters });
    }
    Ok(RobustnessTable { classes, columns })
}

/// Trains one model per decoder (real vs that decoder) and evaluates each
/// on every decoder. A failing row is recorded and the others proceed.
pub fn generalization_matrix(
    manifest: &Manifest,
    store: &ClipStore,
    decoders: &[DecoderId],
    front: FrontEnd,
    arch: Option<ArchSpec>,
    tcfg: &TrainConfig,
    opts: &EvalOptions,
) -> Result<(GeneralizationMatrix, Vec<Option<ModelParams>>)> {
    let models: Vec<std::result::Result<ModelParams, String>> = decoders
        .iter()
        .map(|d| {
            log::info!("generalization row {d}: training");
            train(manifest, store, std::slice::from_ref(d), front, arch.clone(), tcfg).map(|(m, _)| m).map_err(|e| e.to_string())
        })
        .collect();
    let matrix = generalization_from_models(&models, manifest, store, decoders, &front, opts)?;
    Ok((matrix, models.into_iter().map(|m| m.ok()).collect()))
}

/// Generalization matrix from already trained row models.
pub fn generalization_from_models(
    models: &[std::result::Result<ModelParams, String>],
    manifest: &Manifest,
    store: &ClipStore,
    decoders: &[DecoderId],
    front: &FrontEnd,
    opts: &EvalOptions,
) -> Result<GeneralizationMatrix> {
    if models.len() != decoders.len() {
        return Err(Error::Config(format!("{} row models for {} decoders", models.len(), decoders.len())));
    }
    let mut matrix = GeneralizationMatrix::new(decoders.to_vec());
    let mut eval_manifest = manifest.clone();
    eval_manifest.decoders = decoders.to_vec();
    eval_manifest.records.retain(|r| r.decoder.is_real() || decoders.contains(&r.decoder));
    for (i, model) in models.iter().enumerate() {
        let outcome = model.clone().and_then(|m| {
            evaluate_accuracy(&m, &eval_manifest, store, front, opts).map_err(|e| e.to_string())
        });
        match outcome {
            Ok(acc) => matrix.set_row(i, &acc),
            Err(e) => matrix.errors[i] = Some(e),
        }
    }
    Ok(matrix)
}

/// Reliability curve of the predictions over a split.
pub fn calibration_curve(
    params: &ModelParams,
    manifest: &Manifest,
    store: &ClipStore,
    front: &FrontEnd,
    scoring: CalibrationScoring,
    opts: &EvalOptions,
) -> Result<CalibrationCurve> {
    let records = split_records(manifest, opts.split);
    require_records(&records, opts.split)?;
    let scores = score_records(params, store, front, &records, opts, |_| Manipulation::Identity, None)?;
    let p: Vec<f64> = scores.iter().map(|s| s.p_fake).collect();
    let fake: Vec<bool> = scores.iter().map(|s| !s.decoder.is_real()).collect();
    Ok(CalibrationCurve::from_predictions(&p, &fake, scoring)?)
}

/// Aligned mono excerpts of a real track and its reconstruction, each
/// peak-normalized.
#[derive(Debug, Clone)]
pub struct MixPair {
    pub source: String,
    pub real: AudioClip,
    pub fake: AudioClip,
}

/// Up to `limit` aligned excerpt pairs for `decoder`. Both tracks are
/// trimmed to the shorter length and excerpted at the same offset; pairs
/// whose lengths differ by more than 0.1 s are skipped with a reason.
pub fn mix_pairs(
    manifest: &Manifest,
    store: &ClipStore,
    decoder: &DecoderId,
    limit: Option<usize>,
    opts: &EvalOptions,
) -> Result<(Vec<MixPair>, Vec<String>)> {
    opts.validate()?;
    let mut jobs = Vec::new();
    let mut skipped = Vec::new();
    for real in manifest.reals(opts.split) {
        match manifest.fake_of(&real.track_id, decoder) {
            Some(fake) => {
                for k in 0..opts.excerpts_per_track {
                    jobs.push((real, fake, k));
                }
            }
            None => skipped.push(format!("{}: no {decoder} reconstruction", real.track_id)),
        }
    }
    if let Some(n) = limit {
        jobs.truncate(n);
    }
    let made: Vec<std::result::Result<MixPair, String>> = jobs
        .par_iter()
        .map(|&(real, fake, k)| {
            let (r, f) = (store.get(real)?, store.get(fake)?);
            let gap = (r.duration_s() - f.duration_s()).abs();
            if gap > MAX_PAIR_MISMATCH_S {
                return Ok(Err(format!("{}: lengths differ by {gap:.3} s", real.track_id)));
            }
            let len = r.frames().min(f.frames());
            let frames = r.frames_for(opts.excerpt_s);
            if frames > len {
                return Ok(Err(format!("{}: shorter than the {} s excerpt", real.track_id, opts.excerpt_s)));
            }
            let (r, f) = (r.fit_to(len)?, f.fit_to(len)?);
            let start = r.excerpt_offset(frames, rng::unit_from_seed(opts.excerpt_seed(&real.track_id, k)));
            let prep = |c: &AudioClip| -> Result<AudioClip> {
                Ok(c.slice(start, frames)?.to_mono(EVAL_MONO_ALPHA)?.peak_normalize())
            };
            Ok(Ok(MixPair { source: real.track_id.clone(), real: prep(&r)?, fake: prep(&f)? }))
        })
        .collect::<Result<_>>()?;
    let mut pairs = Vec::new();
    for m in made {
        match m {
            Ok(p) => pairs.push(p),
            Err(reason) => skipped.push(reason),
        }
    }
    Ok((pairs, skipped))
}

/// Mean `p_fake` of `(1 - lambda) * real + lambda * fake` per lambda.
pub fn mixing_curve_from_pairs(params: &ModelParams, front: &FrontEnd, pairs: &[MixPair], lambdas: &[f64], skipped: Vec<String>) -> Result<MixCurve> {
    validate_lambda_grid(lambdas)?;
    let predictions: Vec<Vec<f64>> = lambdas
        .iter()
        .map(|&l| {
            pairs
                .par_iter()
                .map(|p| predict_clip(params, front, &mix_excerpts(&p.real, &p.fake, l)?))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(MixCurve::from_predictions(lambdas, &predictions, skipped)?)
}

pub fn mixing_curve(
    params: &ModelParams,
    manifest: &Manifest,
    store: &ClipStore,
    front: &FrontEnd,
    decoder: &DecoderId,
    lambdas: &[f64],
    n_per_lambda: Option<usize>,
    opts: &EvalOptions,
) -> Result<MixCurve> {
    validate_lambda_grid(lambdas)?;
    let (pairs, skipped) = mix_pairs(manifest, store, decoder, n_per_lambda, opts)?;
    if pairs.is_empty() {
        return Err(Error::Core(sfdetect_core::Error::Dataset(format!("no usable real/{decoder} pairs"))));
    }
    mixing_curve_from_pairs(params, front, &pairs, lambdas, skipped)
}

/// Patch side used by a model for attribution.
pub fn patch_size(params: &ModelParams) -> usize {
    params.patch_size.unwrap_or_else(|| params.arch.receptive_field())
}

/// Sliding-window map of a mono clip.
pub fn attribution(params: &ModelParams, front: &FrontEnd, mono: &AudioClip, stride: usize, source: &str) -> Result<AttributionMap> {
    let x = front.tensor(mono)?;
    Ok(attribution_map(&x, patch_size(params), stride, source, |p| Ok(params.predict_tensor(p)?.p_fake))?)
}

/// Cell label in a splice demonstration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    /// The window is exactly one spliced patch.
    Spliced,
    /// Partly overlaps a spliced patch.
    Overlap,
    Untouched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpliceDemo {
    pub map: AttributionMap,
    /// Grid cells whose windows were replaced by the fake's.
    pub spliced_cells: Vec<(usize, usize)>,
    /// Row-major kind of every grid cell.
    pub cells: Vec<CellKind>,
    pub mean_spliced: Option<f64>,
    pub mean_untouched: Option<f64>,
}

/// Replaces the windows of `cells` (grid coordinates at `stride`) in the
/// real clip's representation by the fake's, then maps the result.
pub fn splice_demo(
    params: &ModelParams,
    front: &FrontEnd,
    real: &AudioClip,
    fake: &AudioClip,
    cells: &[(usize, usize)],
    stride: usize,
    source: &str,
) -> Result<SpliceDemo> {
    let mut x = front.tensor(real)?;
    let f = front.tensor(fake)?;
    if (x.channels, x.height, x.width) != (f.channels, f.height, f.width) {
        return Err(Error::Core(sfdetect_core::Error::Shape("real and fake representations differ in shape".into())));
    }
    let patch = patch_size(params);
    let rows = sfdetect_core::eval::grid_len(x.height, patch, stride)?;
    let cols = sfdetect_core::eval::grid_len(x.width, patch, stride)?;
    for &(r, c) in cells {
        if r >= rows || c >= cols {
            return Err(Error::Config(format!("splice cell ({r}, {c}) outside the {rows}x{cols} grid")));
        }
        let (y0, x0) = (r * stride, c * stride);
        for ch in 0..x.channels {
            for y in y0..y0 + patch {
                let start = (ch * x.height + y) * x.width + x0;
                x.data[start..start + patch].copy_from_slice(&f.data[start..start + patch]);
            }
        }
    }
    let map = attribution_map(&x, patch, stride, source, |p| Ok(params.predict_tensor(p)?.p_fake))?;
    let overlaps = |a: usize, b: usize| a < b + patch && b < a + patch;
    let mut kinds = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let (y, xx) = (r * stride, c * stride);
            let kind = if cells.contains(&(r, c)) {
                CellKind::Spliced
            } else if cells.iter().any(|&(sr, sc)| overlaps(y, sr * stride) && overlaps(xx, sc * stride)) {
                CellKind::Overlap
            } else {
                CellKind::Untouched
            };
            kinds.push(kind);
        }
    }
    let mean_of = |k: CellKind| {
        let v: Vec<f64> = kinds.iter().zip(&map.values).filter(|(c, _)| **c == k).map(|(_, &p)| p).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    Ok(SpliceDemo {
        mean_spliced: mean_of(CellKind::Spliced),
        mean_untouched: mean_of(CellKind::Untouched),
        map,
        spliced_cells: cells.to_vec(),
        cells: kinds,
    })
}
