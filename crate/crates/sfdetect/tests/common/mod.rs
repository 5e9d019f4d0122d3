#![allow(dead_code)]

use std::path::Path;

use sfdetect::audio_io::write_wav;
use sfdetect::core::dataset::{DecoderId, Manifest, Split, TrackRecord};
use sfdetect::core::dsp::StftConfig;
use sfdetect::core::fakegen::GriffinMel;
use sfdetect::core::net::ArchSpec;
use sfdetect::core::{AudioClip, CANONICAL_RATE};
use sfdetect::synth::synth_track;

/// A few thousand parameters; enough to separate Griffin-Lim output from
/// the synthetic reals.
pub fn tiny_arch() -> ArchSpec {
    ArchSpec { conv_filters: vec![4, 8, 8], hidden_linear: 8, ..ArchSpec::default() }
}

pub fn sine(hz: f64, seconds: f64, sr: u32, channels: usize) -> AudioClip {
    let n = (seconds * f64::from(sr)).round() as usize;
    let x: Vec<f64> = (0..n).map(|i| 0.5 * (std::f64::consts::TAU * hz * i as f64 / f64::from(sr)).sin()).collect();
    AudioClip::from_f64(&vec![x; channels], sr).unwrap()
}

/// One real track and its GM-512 reconstruction written under `root`, all
/// in `split`.
pub fn pair_records(root: &Path, id: &str, seed: u64, seconds: f64, split: Split) -> Vec<TrackRecord> {
    let real = synth_track(seed, seconds, CANONICAL_RATE).unwrap();
    let gm = DecoderId::griffinmel(512);
    let fake = GriffinMel::new(512, StftConfig::default(), 8, CANONICAL_RATE).unwrap().reconstruct(&real, seed).unwrap();
    let mut out = Vec::new();
    for (decoder, clip) in [(DecoderId::real(), real), (gm, fake)] {
        let (track_id, path) = if decoder.is_real() {
            (id.to_string(), format!("real/{id}.wav"))
        } else {
            (TrackRecord::fake_id(id, &decoder), TrackRecord::layout_path(&decoder, id))
        };
        write_wav(&root.join(&path), &clip).unwrap();
        out.push(TrackRecord {
            track_id,
            decoder,
            path,
            split,
            sample_rate: CANONICAL_RATE,
            duration_s: clip.duration_s(),
            source_track_id: id.to_string(),
        });
    }
    out
}

pub fn manifest_of(records: Vec<TrackRecord>) -> Manifest {
    Manifest::from_records(records).unwrap()
}
