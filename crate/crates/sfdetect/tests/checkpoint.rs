mod common;

use sfdetect::checkpoint::{decode, encode, load, save, MAGIC};
use sfdetect::core::dataset::DecoderId;
use sfdetect::core::dsp::RepKind;
use sfdetect::core::net::{ModelParams, Tensor};
use sfdetect::Error;

fn model() -> ModelParams {
    let mut p = ModelParams::init(common::tiny_arch(), RepKind::Amplitude, 21).unwrap();
    p.trained_on = vec![DecoderId::griffinmel(512)];
    p.patch_size = Some(30);
    p
}

fn probe(seed: u32) -> Tensor<f32> {
    let data = (0..40 * 70).map(|i| ((i as u32).wrapping_mul(2_654_435_761).wrapping_add(seed) % 1000) as f32 / 500.0 - 1.0).collect();
    Tensor { channels: 1, height: 40, width: 70, data }
}

#[test]
fn round_trip_preserves_logits_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.sfm");
    let p = model();
    save(&path, &p).unwrap();
    let q = load(&path).unwrap();
    assert_eq!(p, q);
    for s in 0..3 {
        let (a, b) = (p.predict_tensor(&probe(s)).unwrap(), q.predict_tensor(&probe(s)).unwrap());
        assert_eq!(a.logit.to_bits(), b.logit.to_bits());
    }
    assert_eq!(std::fs::read(&path).unwrap(), encode(&q).unwrap());
}

#[test]
fn corrupted_files_are_rejected() {
    let p = model();
    let good = encode(&p).unwrap();
    let path = std::path::Path::new("m.sfm");

    let mut bad_magic = good.clone();
    bad_magic[0] = b'X';
    assert!(matches!(decode(&bad_magic, path), Err(Error::Checkpoint { .. })));

    let mut bad_header = good.clone();
    bad_header[12] = b'#';
    assert!(matches!(decode(&bad_header, path), Err(Error::Checkpoint { .. })));

    let truncated = &good[..good.len() - 4];
    let err = decode(truncated, path).unwrap_err();
    assert!(matches!(err, Error::Checkpoint { .. }));
    assert_eq!(err.exit_code(), 9);

    let mut wrong_count = good.clone();
    let header_len = u32::from_le_bytes(good[8..12].try_into().unwrap()) as usize;
    let header = String::from_utf8(good[12..12 + header_len].to_vec()).unwrap();
    let n = p.weights.len();
    let edited = header.replace(&format!("\"param_count\":{n}"), &format!("\"param_count\":{}", n + 1));
    assert_ne!(edited, header);
    wrong_count.splice(12..12 + header_len, edited.bytes());
    wrong_count.splice(8..12, (edited.len() as u32).to_le_bytes());
    assert!(matches!(decode(&wrong_count, path), Err(Error::Checkpoint { reason, .. }) if reason.contains("declares")));

    let mut nan = good.clone();
    let at = nan.len() - 4;
    nan[at..].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(decode(&nan, path).is_err());
    assert_eq!(&good[..8], MAGIC);
}

#[test]
fn missing_checkpoint_is_a_missing_artifact() {
    let err = load(std::path::Path::new("/nonexistent/model.sfm")).unwrap_err();
    assert!(matches!(err, Error::MissingArtifact(_)));
    assert_eq!(err.exit_code(), 4);
}
