//! External transcoder for compressed containers and the re-encoding probes.
//!
//! The executable is driven with ffmpeg-compatible arguments:
//! `-hide_banner -loglevel error -y -i <input> [-c:a <encoder> -b:a <kbps>k] <output>`.
//! Output format is chosen by the output file extension.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::Command;

use sfdetect_core::manipulate::{Codec, Reencoder};
use sfdetect_core::AudioClip;

use crate::audio_io::{read_wav, write_wav};
use crate::error::{Error, Result};

/// Environment variable naming the transcoder executable.
pub const ENV_VAR: &str = "SF_TRANSCODER";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcoder {
    exe: PathBuf,
}

/// Encoder name and container extension per codec.
pub fn codec_args(codec: Codec) -> (&'static str, &'static str) {
    match codec {
        Codec::Mp3 => ("libmp3lame", "mp3"),
        Codec::Aac => ("aac", "m4a"),
        Codec::Opus => ("libopus", "opus"),
    }
}

impl Transcoder {
    pub fn new(exe: impl Into<PathBuf>) -> Result<Self> {
        let exe = exe.into();
        if !exe.is_file() {
            return Err(Error::Config(format!("transcoder {} does not exist", exe.display())));
        }
        Ok(Self { exe })
    }

    /// An explicit path wins over `SF_TRANSCODER`; neither gives `None`.
    pub fn resolve(explicit: Option<&Path>) -> Result<Option<Self>> {
        if let Some(p) = explicit {
            return Self::new(p).map(Some);
        }
        match std::env::var_os(ENV_VAR) {
            Some(v) if !v.is_empty() => Self::new(PathBuf::from(v)).map(Some),
            _ => Ok(None),
        }
    }

    pub fn exe(&self) -> &Path {
        &self.exe
    }

    fn run(&self, input: &Path, encode: Option<(Codec, u32)>, output: &Path) -> Result<()> {
        let mut args: Vec<OsString> =
            ["-hide_banner", "-loglevel", "error", "-y", "-i"].iter().map(OsString::from).collect();
        args.push(input.into());
        if let Some((codec, kbps)) = encode {
            args.extend(["-c:a".into(), codec_args(codec).0.into(), "-b:a".into(), format!("{kbps}k").into()]);
        }
        args.push(output.into());
        let out = Command::new(&self.exe)
            .args(&args)
            .output()
            .map_err(|e| Error::Transcoder(format!("cannot run {}: {e}", self.exe.display())))?;
        if !out.status.success() {
            let stderr = String::from_utf8_lossy(&out.stderr);
            return Err(Error::Transcoder(format!(
                "{} exited with {} on {}: {}",
                self.exe.display(),
                out.status,
                input.display(),
                stderr.trim()
            )));
        }
        if !output.is_file() {
            return Err(Error::Transcoder(format!("{} produced no {}", self.exe.display(), output.display())));
        }
        Ok(())
    }

    /// Decodes any container the transcoder understands to a clip at the
    /// file's native rate.
    pub fn decode(&self, input: &Path) -> Result<AudioClip> {
        let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
        let wav = dir.path().join("decoded.wav");
        self.run(input, None, &wav)?;
        Ok(read_wav(&wav)?.with_source(input.display().to_string()))
    }

    /// Encode then decode, converted back to the clip's rate.
    pub fn round_trip(&self, clip: &AudioClip, codec: Codec, kbps: u32) -> Result<AudioClip> {
        let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
        let src = dir.path().join("source.wav");
        let enc = dir.path().join(format!("encoded.{}", codec_args(codec).1));
        write_wav(&src, clip)?;
        self.run(&src, Some((codec, kbps)), &enc)?;
        let decoded = self.decode(&enc)?.resample(clip.sample_rate())?;
        Ok(decoded.with_source(clip.source_path.clone()))
    }
}

impl Reencoder for Transcoder {
    fn reencode(&self, clip: &AudioClip, codec: Codec, bitrate_kbps: u32) -> sfdetect_core::Result<AudioClip> {
        self.round_trip(clip, codec, bitrate_kbps).map_err(|e| sfdetect_core::Error::Config(e.to_string()))
    }
}
