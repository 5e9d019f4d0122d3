//! Deterministic report files. Every result type is written as pretty JSON
//! plus a CSV table with a header row; attribution maps also get a PGM.
//! Floats are printed in their shortest round-trip form.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sfdetect_core::eval::{AttributionMap, CalibrationCurve, ClassAccuracy, GeneralizationMatrix, MixCurve};
use sfdetect_core::net::GradCheck;

use crate::dataset::write_atomic;
use crate::error::{Error, Result};
use crate::protocols::{ColumnOutcome, RobustnessTable, SpliceDemo};
use crate::train::TrainLog;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::json(format!("serializing {}", path.display()), e))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}

/// Files written by one emit call.
pub type Written = Vec<PathBuf>;

fn accuracy_rows(acc: &ClassAccuracy) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = acc
        .per_class
        .iter()
        .map(|r| vec![r.decoder.name(), r.n.to_string(), r.correct.to_string(), opt(r.accuracy)])
        .collect();
    let correct: usize = acc.per_class.iter().map(|r| r.correct).sum();
    rows.push(vec!["overall".into(), acc.n_total.to_string(), correct.to_string(), opt(acc.overall)]);
    rows
}

/// `accuracy.{json,csv}`, one CSV row per class plus `overall`.
pub fn emit_accuracy(dir: &Path, acc: &ClassAccuracy) -> Result<Written> {
    let (json, csv) = (dir.join("accuracy.json"), dir.join("accuracy.csv"));
    write_json(&json, acc)?;
    write_csv(&csv, &["decoder", "n", "correct", "accuracy"], accuracy_rows(acc))?;
    Ok(vec![json, csv])
}

/// `calibration.{json,csv}`, one CSV row per bin.
pub fn emit_calibration(dir: &Path, curve: &CalibrationCurve) -> Result<Written> {
    let (json, csv) = (dir.join("calibration.json"), dir.join("calibration.csv"));
    write_json(&json, curve)?;
    let rows = curve
        .bins
        .iter()
        .map(|b| {
            vec![
                b.lower.to_string(),
                b.upper.to_string(),
                b.count.to_string(),
                opt(b.mean_predicted),
                opt(b.expected),
                opt(b.empirical_accuracy),
                opt(b.ci95_low),
                opt(b.ci95_high),
            ]
        })
        .collect();
    write_csv(
        &csv,
        &["bin_lower", "bin_upper", "count", "mean_predicted", "expected", "empirical_accuracy", "ci95_low", "ci95_high"],
        rows,
    )?;
    Ok(vec![json, csv])
}

/// `robustness.{json,csv}`: one CSV row per (manipulation, class); skipped
/// and failed columns get a single row with the reason.
pub fn emit_robustness(dir: &Path, table: &RobustnessTable) -> Result<Written> {
    let (json, csv) = (dir.join("robustness.json"), dir.join("robustness.csv"));
    write_json(&json, table)?;
    let mut rows = Vec::new();
    for col in &table.columns {
        match &col.outcome {
            ColumnOutcome::Done { accuracy } => {
                for r in accuracy_rows(accuracy) {
                    rows.push([vec![col.manipulation.clone(), "done".into()], r, vec![String::new()]].concat());
                }
            }
            ColumnOutcome::Skipped { reason } | ColumnOutcome::Failed { reason } => {
                let status = if matches!(col.outcome, ColumnOutcome::Skipped { .. }) { "skipped" } else { "failed" };
                rows.push(vec![
                    col.manipulation.clone(),
                    status.into(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    reason.clone(),
                ]);
            }
        }
    }
    write_csv(&csv, &["manipulation", "status", "decoder", "n", "correct", "accuracy", "reason"], rows)?;
    Ok(vec![json, csv])
}

/// `generalization.{json,csv}`: rows are training decoders, columns the
/// real specificity and each evaluated decoder's recall.
pub fn emit_generalization(dir: &Path, m: &GeneralizationMatrix) -> Result<Written> {
    let (json, csv) = (dir.join("generalization.json"), dir.join("generalization.csv"));
    write_json(&json, m)?;
    let mut header = vec!["trained_on".to_string(), "real".to_string()];
    header.extend(m.decoders.iter().map(|d| d.name()));
    header.push("error".into());
    let rows = (0..m.decoders.len())
        .map(|i| {
            let mut row = vec![m.decoders[i].name(), opt(m.real_specificity[i])];
            row.extend(m.recall[i].iter().map(|v| opt(*v)));
            row.push(m.errors[i].clone().unwrap_or_default());
            row
        })
        .collect();
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&csv, &h, rows)?;
    Ok(vec![json, csv])
}

/// `mixing.{json,csv}`, one CSV row per mixing factor.
pub fn emit_mixing(dir: &Path, curve: &MixCurve) -> Result<Written> {
    let (json, csv) = (dir.join("mixing.json"), dir.join("mixing.csv"));
    write_json(&json, curve)?;
    let rows = curve
        .points
        .iter()
        .map(|p| {
            vec![
                p.lambda.to_string(),
                p.n_mixes.to_string(),
                opt(p.mean_p_fake),
                opt(p.ci95_low),
                opt(p.ci95_high),
                opt(p.frac_predicted_fake),
            ]
        })
        .collect();
    write_csv(&csv, &["lambda", "n_mixes", "mean_p_fake", "ci95_low", "ci95_high", "frac_predicted_fake"], rows)?;
    Ok(vec![json, csv])
}

/// Binary 8-bit PGM, `round(255 * p_fake)` per cell.
pub fn pgm(map: &AttributionMap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", map.cols, map.rows).into_bytes();
    out.extend(map.values.iter().map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

fn map_rows(map: &AttributionMap) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for r in 0..map.rows {
        for c in 0..map.cols {
            let (y, x) = map.origin(r, c);
            rows.push(vec![r.to_string(), c.to_string(), y.to_string(), x.to_string(), map.at(r, c).to_string()]);
        }
    }
    rows
}

/// `attribution.{json,csv,pgm}`.
pub fn emit_attribution(dir: &Path, map: &AttributionMap) -> Result<Written> {
    let (json, csv, img) = (dir.join("attribution.json"), dir.join("attribution.csv"), dir.join("attribution.pgm"));
    write_json(&json, map)?;
    write_csv(&csv, &["row", "col", "origin_row", "origin_col", "p_fake"], map_rows(map))?;
    write_atomic(&img, &pgm(map))?;
    Ok(vec![json, csv, img])
}

/// Splice demonstrations: the attribution files plus `splice.json` and a
/// `kind` column in `attribution.csv`.
pub fn emit_splice(dir: &Path, demo: &SpliceDemo) -> Result<Written> {
    let (json, csv, img) = (dir.join("splice.json"), dir.join("attribution.csv"), dir.join("attribution.pgm"));
    write_json(&json, demo)?;
    let rows = map_rows(&demo.map)
        .into_iter()
        .zip(&demo.cells)
        .map(|(mut r, k)| {
            r.push(serde_json::to_value(k).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default());
            r
        })
        .collect();
    write_csv(&csv, &["row", "col", "origin_row", "origin_col", "p_fake", "kind"], rows)?;
    write_atomic(&img, &pgm(&demo.map))?;
    Ok(vec![json, csv, img])
}

/// `train_log.{json,csv}` and `validation.csv`.
pub fn emit_train_log(dir: &Path, log: &TrainLog) -> Result<Written> {
    let (json, csv, val) = (dir.join("train_log.json"), dir.join("train_log.csv"), dir.join("validation.csv"));
    write_json(&json, log)?;
    let rows = log.steps.iter().map(|s| vec![s.step.to_string(), s.loss.to_string(), s.lr.to_string()]).collect();
    write_csv(&csv, &["step", "loss", "lr"], rows)?;
    let rows = log.validations.iter().map(|v| vec![v.step.to_string(), v.accuracy.to_string()]).collect();
    write_csv(&val, &["step", "accuracy"], rows)?;
    Ok(vec![json, csv, val])
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckRow {
    pub trial: u64,
    pub conv_filters: Vec<usize>,
    pub params: usize,
    pub relative_error: f64,
    pub max_abs_error: f64,
    pub passed: bool,
}

/// `gradcheck.{json,csv}`.
pub fn emit_gradcheck(dir: &Path, rows: &[GradCheckRow]) -> Result<Written> {
    let (json, csv) = (dir.join("gradcheck.json"), dir.join("gradcheck.csv"));
    write_json(&json, rows)?;
    let table = rows
        .iter()
        .map(|r| {
            let filters: Vec<String> = r.conv_filters.iter().map(usize::to_string).collect();
            vec![
                r.trial.to_string(),
                filters.join(" "),
                r.params.to_string(),
                r.relative_error.to_string(),
                r.max_abs_error.to_string(),
                r.passed.to_string(),
            ]
        })
        .collect();
    write_csv(&csv, &["trial", "conv_filters", "params", "relative_error", "max_abs_error", "passed"], table)?;
    Ok(vec![json, csv])
}

impl GradCheckRow {
    pub fn new(trial: u64, filters: Vec<usize>, g: &GradCheck, tolerance: f64) -> Self {
        Self {
            trial,
            conv_filters: filters,
            params: g.params,
            relative_error: g.relative_error,
            max_abs_error: g.max_abs_error,
            passed: g.relative_error < tolerance,
        }
    }
}
