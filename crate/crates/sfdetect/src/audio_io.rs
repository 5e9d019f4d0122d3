//! WAV decoding and encoding, plus `load_audio`, which also accepts
//! compressed containers when a transcoder is configured.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use sfdetect_core::AudioClip;

use crate::error::{Error, Result};
use crate::transcoder::Transcoder;

/// File extensions picked up when scanning a directory for audio.
pub const AUDIO_EXTENSIONS: [&str; 8] = ["wav", "wave", "mp3", "aac", "m4a", "opus", "ogg", "flac"];

pub fn has_audio_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| AUDIO_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Whether the file starts with a RIFF/WAVE header.
pub fn is_wav(path: &Path) -> Result<bool> {
    let mut head = [0u8; 12];
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut filled = 0;
    while filled < head.len() {
        match f.read(&mut head[filled..]).map_err(|e| Error::io(path, e))? {
            0 => return Ok(false),
            n => filled += n,
        }
    }
    Ok(&head[0..4] == b"RIFF" && &head[8..12] == b"WAVE")
}

/// Header facts of a WAV file, read without decoding samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavInfo {
    pub sample_rate: u32,
    pub channels: u16,
    pub frames: u32,
}

impl WavInfo {
    pub fn duration_s(&self) -> f64 {
        f64::from(self.frames) / f64::from(self.sample_rate)
    }
}

pub fn wav_info(path: &Path) -> Result<WavInfo> {
    let reader = WavReader::open(path).map_err(|e| decode_error(path, e))?;
    let spec = reader.spec();
    Ok(WavInfo { sample_rate: spec.sample_rate, channels: spec.channels, frames: reader.duration() })
}

fn decode_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::decode(path, other.to_string()),
    }
}

/// Decodes 8/16/24/32-bit integer or 32-bit float PCM. Integer samples are
/// scaled by `2^-(bits-1)`.
pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let reader = WavReader::open(path).map_err(|e| decode_error(path, e))?;
    let spec = reader.spec();
    let n_ch = usize::from(spec.channels);
    if !(1..=2).contains(&n_ch) {
        return Err(Error::decode(path, format!("{n_ch} channels; only mono and stereo are supported")));
    }
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader.into_samples::<f32>().collect::<std::result::Result<_, _>>(),
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / f64::from(1u32 << (bits - 1));
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| (f64::from(v) * scale) as f32))
                .collect::<std::result::Result<_, _>>()
        }
        (fmt, bits) => return Err(Error::decode(path, format!("unsupported sample format {fmt:?} at {bits} bits"))),
    }
    .map_err(|e| decode_error(path, e))?;
    if interleaved.is_empty() {
        return Err(Error::decode(path, "file holds no samples"));
    }
    let frames = interleaved.len() / n_ch;
    let channels: Vec<Vec<f32>> =
        (0..n_ch).map(|c| interleaved.iter().skip(c).step_by(n_ch).take(frames).copied().collect()).collect();
    let clip = AudioClip::new(channels, spec.sample_rate).map_err(|e| Error::decode(path, e.to_string()))?;
    Ok(clip.with_source(path.display().to_string()))
}

fn write_with<F>(path: &Path, clip: &AudioClip, spec: WavSpec, mut put: F) -> Result<()>
where
    F: FnMut(&mut WavWriter<std::io::BufWriter<File>>, f32) -> hound::Result<()>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = WavWriter::create(path, spec).map_err(|e| decode_error(path, e))?;
    for i in 0..clip.frames() {
        for c in 0..clip.num_channels() {
            put(&mut w, clip.channel(c)[i]).map_err(|e| decode_error(path, e))?;
        }
    }
    w.finalize().map_err(|e| decode_error(path, e))
}

/// Writes 32-bit float PCM, which stores every clip sample exactly.
pub fn write_wav(path: &Path, clip: &AudioClip) -> Result<()> {
    let spec = WavSpec {
        channels: clip.num_channels() as u16,
        sample_rate: clip.sample_rate(),
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    write_with(path, clip, spec, |w, s| w.write_sample(s))
}

/// Writes 16-bit PCM with the same `2^-15` step `read_wav` uses, saturating
/// at full scale.
pub fn write_wav_pcm16(path: &Path, clip: &AudioClip) -> Result<()> {
    let spec = WavSpec {
        channels: clip.num_channels() as u16,
        sample_rate: clip.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    write_with(path, clip, spec, |w, s| {
        w.write_sample((f64::from(s) * 32768.0).round().clamp(-32768.0, 32767.0) as i16)
    })
}

/// Decodes `path` and converts it to `target_rate`. Non-WAV inputs go
/// through `transcoder`; without one they are a configuration error.
pub fn load_audio(path: &Path, target_rate: u32, transcoder: Option<&Transcoder>) -> Result<AudioClip> {
    if !path.exists() {
        return Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)));
    }
    let clip = if is_wav(path)? {
        read_wav(path)?
    } else {
        match transcoder {
            Some(t) => t.decode(path)?,
            None => {
                return Err(Error::Config(format!(
                    "{} is not a WAV file; set {} or transcoder_path to decode it",
                    path.display(),
                    crate::transcoder::ENV_VAR
                )))
            }
        }
    };
    Ok(clip.resample(target_rate)?.with_source(path.display().to_string()))
}
