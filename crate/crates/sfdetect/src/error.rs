use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Errors of the file-level toolkit. Every variant maps to a distinct
/// process exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] sfdetect_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot decode {}: {reason}", path.display())]
    Decode { path: PathBuf, reason: String },
    #[error("transcoder failed: {0}")]
    Transcoder(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("bad checkpoint {}: {reason}", path.display())]
    Checkpoint { path: PathBuf, reason: String },
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Exit code for command-line usage errors (reported by the argument parser).
pub const EXIT_USAGE: i32 = 2;

impl Error {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        Error::Io { path: path.as_ref().to_path_buf(), source }
    }

    pub fn decode(path: impl AsRef<Path>, reason: impl Into<String>) -> Self {
        Error::Decode { path: path.as_ref().to_path_buf(), reason: reason.into() }
    }

    pub fn checkpoint(path: impl AsRef<Path>, reason: impl Into<String>) -> Self {
        Error::Checkpoint { path: path.as_ref().to_path_buf(), reason: reason.into() }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json { context: context.into(), source }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        use sfdetect_core::Error as C;
        match self {
            Error::Core(C::Argument(_)) => "argument",
            Error::Core(C::Config(_)) | Error::Config(_) => "config",
            Error::Core(C::Dataset(_)) => "dataset",
            Error::Core(C::Length(_)) => "length",
            Error::Core(C::Shape(_)) => "shape",
            Error::Io { .. } => "io",
            Error::Decode { .. } => "decode",
            Error::Transcoder(_) => "transcoder",
            Error::MissingArtifact(_) => "missing_artifact",
            Error::Checkpoint { .. } => "checkpoint",
            Error::CheckFailed(_) => "check_failed",
            Error::Json { .. } => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "config" | "argument" => 3,
            "missing_artifact" => 4,
            "dataset" => 5,
            "io" | "decode" => 6,
            "transcoder" => 7,
            "check_failed" => 8,
            "checkpoint" => 9,
            _ => 1,
        }
    }

    /// The record printed to stderr when a subcommand fails.
    pub fn record(&self) -> ErrorRecord {
        ErrorRecord { kind: self.kind(), exit_code: self.exit_code(), message: self.to_string() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub kind: &'static str,
    pub exit_code: i32,
    pub message: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct_per_category() {
        let errors = [
            Error::Config("x".into()),
            Error::MissingArtifact("x".into()),
            Error::Core(sfdetect_core::Error::Dataset("x".into())),
            Error::io("a", io::Error::other("x")),
            Error::Transcoder("x".into()),
            Error::CheckFailed("x".into()),
            Error::checkpoint("a", "x"),
        ];
        let mut codes: Vec<i32> = errors.iter().map(Error::exit_code).collect();
        codes.push(EXIT_USAGE);
        let n = codes.len();
        codes.sort_unstable();
        codes.dedup();
        assert_eq!(codes.len(), n);
        assert!(!codes.contains(&0));
    }
}
