mod common;

use std::f64::consts::TAU;
use std::os::unix::fs::PermissionsExt;

use common::sine;
use sfdetect::audio_io::{load_audio, read_wav, wav_info, write_wav, write_wav_pcm16};
use sfdetect::core::manipulate::{Codec, Reencoder};
use sfdetect::core::CANONICAL_RATE;
use sfdetect::transcoder::Transcoder;
use sfdetect::Error;

fn dft_peak_hz(x: &[f32], sr: u32, lo: usize, hi: usize) -> usize {
    let n = x.len() as f64;
    (lo..=hi)
        .max_by(|&a, &b| {
            let mag = |k: usize| {
                let f = k as f64 * n / f64::from(sr);
                let (mut re, mut im) = (0.0, 0.0);
                for (i, &s) in x.iter().enumerate() {
                    let ph = TAU * f * i as f64 / n;
                    re += f64::from(s) * ph.cos();
                    im -= f64::from(s) * ph.sin();
                }
                re.hypot(im)
            };
            mag(a).total_cmp(&mag(b))
        })
        .unwrap()
}

#[test]
fn resampled_sine_keeps_its_frequency() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tone48k.wav");
    write_wav(&path, &sine(1000.0, 1.0, 48_000, 1)).unwrap();
    let clip = load_audio(&path, CANONICAL_RATE, None).unwrap();
    assert_eq!(clip.sample_rate(), CANONICAL_RATE);
    assert_eq!(clip.frames(), 44_100);
    let peak = dft_peak_hz(clip.channel(0), CANONICAL_RATE, 990, 1010);
    assert!((999..=1001).contains(&peak), "peak at {peak} Hz");
}

#[test]
fn canonical_stereo_loads_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stereo.wav");
    let clip = sine(440.0, 1.0, CANONICAL_RATE, 2);
    write_wav(&path, &clip).unwrap();
    let back = load_audio(&path, CANONICAL_RATE, None).unwrap();
    assert_eq!(back.num_channels(), 2);
    assert_eq!(back.frames(), 44_100);
    for c in 0..2 {
        assert_eq!(back.channel(c), clip.channel(c));
    }
    let info = wav_info(&path).unwrap();
    assert_eq!((info.sample_rate, info.channels, info.frames), (CANONICAL_RATE, 2, 44_100));
}

#[test]
fn low_rate_input_is_upsampled_to_the_canonical_length() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("low.wav");
    write_wav(&path, &sine(300.0, 1.0, 22_050, 1)).unwrap();
    assert_eq!(load_audio(&path, CANONICAL_RATE, None).unwrap().frames(), 44_100);
}

#[test]
fn pcm16_round_trip_is_within_one_step() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pcm16.wav");
    let clip = sine(440.0, 0.5, CANONICAL_RATE, 2);
    write_wav_pcm16(&path, &clip).unwrap();
    let back = read_wav(&path).unwrap();
    for c in 0..2 {
        let err = clip.channel(c).iter().zip(back.channel(c)).map(|(a, b)| (a - b).abs()).fold(0f32, f32::max);
        assert!(err < 1e-4, "max error {err}");
    }
}

#[test]
fn compressed_input_without_transcoder_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("song.mp3");
    std::fs::write(&path, b"ID3\x04\x00not really audio").unwrap();
    let err = load_audio(&path, CANONICAL_RATE, None).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err:?}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn missing_transcoder_path_is_rejected() {
    assert!(matches!(Transcoder::new("/nonexistent/ffmpeg"), Err(Error::Config(_))));
}

/// Stand-in transcoder that copies its input, ignoring codec flags.
fn copy_transcoder(dir: &std::path::Path) -> Transcoder {
    let exe = dir.join("fake-ffmpeg");
    std::fs::write(&exe, "#!/bin/sh\nin=\"\"\nprev=\"\"\nfor a in \"$@\"; do\n  [ \"$prev\" = \"-i\" ] && in=\"$a\"\n  prev=\"$a\"\n  out=\"$a\"\ndone\ncp \"$in\" \"$out\"\n").unwrap();
    std::fs::set_permissions(&exe, std::fs::Permissions::from_mode(0o755)).unwrap();
    Transcoder::new(exe).unwrap()
}

#[test]
fn transcoder_decodes_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let t = copy_transcoder(dir.path());
    let clip = sine(440.0, 0.25, 48_000, 1);
    let disguised = dir.path().join("tone.opus");
    write_wav(&disguised.with_extension("wav"), &clip).unwrap();
    std::fs::rename(disguised.with_extension("wav"), &disguised).unwrap();
    // A WAV under a compressed name is still detected by its header.
    assert_eq!(load_audio(&disguised, 48_000, None).unwrap().channel(0), clip.channel(0));
    let rt = t.reencode(&clip, Codec::Mp3, 64).unwrap();
    assert_eq!(rt.channel(0), clip.channel(0));
}

#[test]
fn failing_transcoder_reports_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("broken");
    std::fs::write(&exe, "#!/bin/sh\necho 'no encoder' >&2\nexit 1\n").unwrap();
    std::fs::set_permissions(&exe, std::fs::Permissions::from_mode(0o755)).unwrap();
    let t = Transcoder::new(exe).unwrap();
    let err = t.round_trip(&sine(440.0, 0.1, CANONICAL_RATE, 1), Codec::Aac, 64).unwrap_err();
    assert!(matches!(&err, Error::Transcoder(m) if m.contains("no encoder")), "{err:?}");
    assert_eq!(err.exit_code(), 7);
}
