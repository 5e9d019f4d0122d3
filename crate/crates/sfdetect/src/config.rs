//! Declarative run configuration (TOML) and the `run.json` provenance file.
//!
//! Every seed is derived from the root `seed` with
//! `derive(seed, "<module>", 0)` for `split`, `render`, `train` and `eval`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sfdetect_core::dataset::{DecoderId, SplitFractions};
use sfdetect_core::dsp::{RepKind, StftConfig};
use sfdetect_core::eval::{default_lambda_grid, validate_lambda_grid, CalibrationScoring};
use sfdetect_core::manipulate::ManipulationKind;
use sfdetect_core::net::{ArchSpec, Padding, TrainConfig};
use sfdetect_core::rng;

use crate::error::{Error, Result};
use crate::pipeline::DEFAULT_CUTOFF_HZ;
use crate::protocols::EvalOptions;

/// Overrides applied on top of the default architecture.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchOverrides {
    pub conv_filters: Option<Vec<usize>>,
    pub kernel: Option<usize>,
    pub pool: Option<usize>,
    pub hidden_linear: Option<usize>,
    pub padding: Option<Padding>,
}

impl ArchOverrides {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    /// Default architecture for `kind` with the overrides applied.
    pub fn resolve(&self, kind: RepKind) -> ArchSpec {
        let base = ArchSpec { in_channels: kind.channels(), one_dimensional: kind == RepKind::Waveform, ..ArchSpec::default() };
        ArchSpec {
            conv_filters: self.conv_filters.clone().unwrap_or(base.conv_filters.clone()),
            kernel: self.kernel.unwrap_or(base.kernel),
            pool: self.pool.unwrap_or(base.pool),
            hidden_linear: self.hidden_linear.unwrap_or(base.hidden_linear),
            padding: self.padding.unwrap_or(base.padding),
            ..base
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub real_dir: Option<PathBuf>,
    #[serde(with = "decoder_names")]
    pub decoders: Vec<DecoderId>,
    pub fractions: SplitFractions,
    pub griffin_lim_iters: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            real_dir: None,
            decoders: vec![DecoderId::griffinmel(256), DecoderId::griffinmel(512)],
            fractions: SplitFractions::default(),
            griffin_lim_iters: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub excerpts_per_track: usize,
    pub excerpt_s: f64,
    pub threshold: f64,
    pub calibration_scoring: CalibrationScoring,
    pub lambda_grid: Vec<f64>,
    /// Mixes per factor; all available pairs when absent.
    pub n_per_lambda: Option<usize>,
    /// Decoder whose reconstructions are mixed with the reals.
    pub mix_decoder: Option<String>,
    /// Attribution stride; half the patch when absent.
    pub attribution_stride: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let e = EvalOptions::default();
        Self {
            excerpts_per_track: e.excerpts_per_track,
            excerpt_s: e.excerpt_s,
            threshold: e.threshold,
            calibration_scoring: CalibrationScoring::default(),
            lambda_grid: default_lambda_grid(),
            n_per_lambda: None,
            mix_decoder: None,
            attribution_stride: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root of every derived seed.
    pub seed: u64,
    pub manifest_path: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub transcoder_path: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub representation: RepKind,
    pub stft: StftConfig,
    pub cutoff_hz: f64,
    pub arch: ArchOverrides,
    pub train: TrainConfig,
    pub manipulations: Vec<ManipulationKind>,
    pub dataset: DatasetConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            manifest_path: None,
            out_dir: None,
            transcoder_path: None,
            jobs: None,
            representation: RepKind::Amplitude,
            stft: StftConfig::default(),
            cutoff_hz: DEFAULT_CUTOFF_HZ,
            arch: ArchOverrides::default(),
            train: TrainConfig::default(),
            manipulations: ManipulationKind::ALL.to_vec(),
            dataset: DatasetConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// Seeds handed to each stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub root: u64,
    pub split: u64,
    pub render: u64,
    pub train: u64,
    pub eval: u64,
}

impl Seeds {
    pub fn from_root(root: u64) -> Self {
        Self {
            root,
            split: rng::derive(root, "split", 0),
            render: rng::derive(root, "render", 0),
            train: rng::derive(root, "train", 0),
            eval: rng::derive(root, "eval", 0),
        }
    }
}

/// Decoder lists as names such as `"griffinmel-512"`.
mod decoder_names {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use sfdetect_core::dataset::DecoderId;

    pub fn serialize<S: Serializer>(v: &[DecoderId], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(DecoderId::name).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DecoderId>, D::Error> {
        Vec::<String>::deserialize(d)?.iter().map(|n| n.parse().map_err(serde::de::Error::custom)).collect()
    }
}

fn config_error(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(config_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(config_error)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingArtifact(format!("config file {}", path.display())));
        }
        Self::from_toml(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Checks every setting against the preconditions of the stages that
    /// consume it.
    pub fn validate(&self) -> Result<()> {
        // TOML integers are signed 64-bit.
        if self.seed > i64::MAX as u64 || self.train.seed > i64::MAX as u64 {
            return Err(Error::Config("seeds must fit in a signed 64-bit integer".into()));
        }
        self.stft.validate()?;
        if !(self.cutoff_hz > 0.0) {
            return Err(Error::Config("cutoff_hz must be positive".into()));
        }
        let arch = self.arch.resolve(self.representation);
        arch.validate()?;
        self.train.validate()?;
        self.dataset.fractions.validate()?;
        if self.dataset.griffin_lim_iters == 0 {
            return Err(Error::Config("griffin_lim_iters must be positive".into()));
        }
        if self.dataset.decoders.iter().any(DecoderId::is_real) {
            return Err(Error::Config("dataset.decoders lists reconstructions only".into()));
        }
        validate_lambda_grid(&self.eval.lambda_grid)?;
        if let Some(d) = &self.eval.mix_decoder {
            d.parse::<DecoderId>()?;
        }
        if self.eval.attribution_stride == Some(0) || self.eval.n_per_lambda == Some(0) || self.jobs == Some(0) {
            return Err(Error::Config("attribution_stride, n_per_lambda and jobs must be positive".into()));
        }
        self.eval_options(self.seeds()).validate()
    }

    pub fn seeds(&self) -> Seeds {
        Seeds::from_root(self.seed)
    }

    pub fn arch_spec(&self) -> ArchSpec {
        self.arch.resolve(self.representation)
    }

    /// Training settings with the derived training seed.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seeds().train, ..self.train.clone() }
    }

    pub fn eval_options(&self, seeds: Seeds) -> EvalOptions {
        EvalOptions {
            excerpts_per_track: self.eval.excerpts_per_track,
            excerpt_s: self.eval.excerpt_s,
            threshold: self.eval.threshold,
            seed: seeds.eval,
            ..EvalOptions::default()
        }
    }
}

/// Provenance written next to every run's outputs. Carries no timestamps
/// so identical runs produce identical files.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord<'a> {
    pub toolkit: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub arguments: serde_json::Value,
    pub config: &'a RunConfig,
    pub seeds: Seeds,
    pub outputs: Vec<String>,
}
