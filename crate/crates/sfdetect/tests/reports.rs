use std::path::Path;

use sfdetect::core::dataset::DecoderId;
use sfdetect::core::eval::{CalibrationCurve, CalibrationScoring, ClassAccuracy, Scored, THRESHOLD};
use sfdetect::protocols::{ColumnOutcome, RobustnessColumn, RobustnessTable};
use sfdetect::report::{emit_accuracy, emit_calibration, emit_robustness, pgm};

fn predictions() -> (Vec<f64>, Vec<bool>) {
    let p: Vec<f64> = (0..240).map(|i| ((i * 37) % 100) as f64 / 100.0).collect();
    let y: Vec<bool> = p.iter().enumerate().map(|(i, &v)| v > 0.5 || i % 7 == 0).collect();
    (p, y)
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn calibration_csv_has_ten_bins_and_is_reproducible() {
    let (p, y) = predictions();
    let curve = CalibrationCurve::from_predictions(&p, &y, CalibrationScoring::LabelAgreement).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit_calibration(a.path(), &curve).unwrap();
    emit_calibration(b.path(), &curve).unwrap();
    for f in ["calibration.json", "calibration.csv"] {
        assert_eq!(read(a.path(), f), read(b.path(), f));
    }
    let text = String::from_utf8(read(a.path(), "calibration.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 11);
    assert!(lines[0].starts_with("bin_lower,bin_upper,count"));
    let counts: usize = lines[1..].iter().map(|l| l.split(',').nth(2).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(counts, 240);
    let json: serde_json::Value = serde_json::from_slice(&read(a.path(), "calibration.json")).unwrap();
    assert_eq!(json["bins"].as_array().unwrap().len(), 10);
}

#[test]
fn accuracy_table_lists_every_class_and_overall() {
    let gm = DecoderId::griffinmel(512);
    let scores = vec![
        Scored { decoder: DecoderId::real(), p_fake: 0.2 },
        Scored { decoder: DecoderId::real(), p_fake: 0.7 },
        Scored { decoder: gm.clone(), p_fake: 0.5 },
    ];
    let acc = ClassAccuracy::from_scores(&scores, &[DecoderId::real(), gm, DecoderId::griffinmel(256)], THRESHOLD);
    let dir = tempfile::tempdir().unwrap();
    emit_accuracy(dir.path(), &acc).unwrap();
    let text = String::from_utf8(read(dir.path(), "accuracy.csv")).unwrap();
    assert_eq!(
        text,
        "decoder,n,correct,accuracy\nreal,2,1,0.5\ngriffinmel-512,1,1,1\ngriffinmel-256,0,0,\noverall,3,2,0.6666666666666666\n"
    );
}

#[test]
fn skipped_robustness_columns_carry_their_reason() {
    let acc = ClassAccuracy::from_scores(&[Scored { decoder: DecoderId::real(), p_fake: 0.1 }], &[DecoderId::real()], THRESHOLD);
    let table = RobustnessTable {
        classes: vec![DecoderId::real()],
        columns: vec![
            RobustnessColumn { manipulation: "identity".into(), outcome: ColumnOutcome::Done { accuracy: acc }, parameters: vec![] },
            RobustnessColumn {
                manipulation: "reencode_mp3".into(),
                outcome: ColumnOutcome::Skipped { reason: "no transcoder".into() },
                parameters: vec![],
            },
        ],
    };
    let dir = tempfile::tempdir().unwrap();
    emit_robustness(dir.path(), &table).unwrap();
    let text = String::from_utf8(read(dir.path(), "robustness.csv")).unwrap();
    assert!(text.contains("reencode_mp3,skipped,,,,,no transcoder"), "{text}");
    let json: serde_json::Value = serde_json::from_slice(&read(dir.path(), "robustness.json")).unwrap();
    assert_eq!(json["columns"][1]["outcome"]["status"], "skipped");
}

#[test]
fn pgm_scales_probabilities_to_bytes() {
    use sfdetect::core::eval::AttributionMap;
    let map = AttributionMap {
        rows: 1,
        cols: 3,
        values: vec![0.0, 0.5, 1.0],
        patch_size: 4,
        stride: 2,
        source: "x".into(),
        source_height: 4,
        source_width: 8,
    };
    assert_eq!(pgm(&map), b"P5\n3 1\n255\n\x00\x80\xff".to_vec());
}
