//! The `sfdetect` command line. Settings come from an optional TOML file
//! (`--config`), and flags win over the file. Every subcommand writes its
//! outputs plus `run.json` under `--out`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sfdetect_core::dataset::{parse_decoders, DecoderId, Split};
use sfdetect_core::eval::CalibrationScoring;
use sfdetect_core::manipulate::{ManipulationKind, Reencoder};
use sfdetect_core::net::{gradcheck, ModelParams};
use sfdetect_core::{rng, CANONICAL_RATE};

use crate::audio_io::load_audio;
use crate::config::{RunConfig, RunRecord, Seeds};
use crate::dataset::{build_manifest, ingest_external, read_manifest, write_manifest, BuildOptions, MANIFEST_FILE};
use crate::error::{Error, Result, EXIT_USAGE};
use crate::pipeline::{ClipStore, FrontEnd, EVAL_MONO_ALPHA};
use crate::report::{self, GradCheckRow};
use crate::transcoder::Transcoder;
use crate::{checkpoint, protocols, synth, train};

/// File name of trained checkpoints inside `--out`.
pub const MODEL_FILE: &str = "model.sfm";
pub const RUN_FILE: &str = "run.json";
/// Output directory when neither `--out` nor `out_dir` is given.
pub const DEFAULT_OUT: &str = "sfdetect-out";

#[derive(Debug, Parser)]
#[command(name = "sfdetect", version, about = "Music deepfake forensics: paired datasets, detector training and evaluation")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Root seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Transcoder executable (overrides `transcoder_path` and SF_TRANSCODER).
    #[arg(long, global = true)]
    pub transcoder: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub validate_every: Option<usize>,
    #[arg(long)]
    pub validation_excerpts: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub target_accuracy: Option<f64>,
    #[arg(long)]
    pub excerpt_s: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub excerpts_per_track: Option<usize>,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "subcommand")]
pub enum Command {
    /// Decode real tracks, render GriffinMel fakes and write the manifest.
    BuildDataset {
        #[arg(long)]
        real: Option<PathBuf>,
        /// Comma-separated decoders, e.g. griffinmel-256,griffinmel-512.
        #[arg(long)]
        decoders: Option<String>,
        #[arg(long)]
        gl_iters: Option<usize>,
    },
    /// Resolve externally rendered reconstructions into the manifest.
    Ingest {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        decoder: String,
        #[arg(long)]
        fake_dir: PathBuf,
    },
    /// Train a detector, or fine-tune one on receptive-field patches.
    Train {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        rep: Option<String>,
        #[arg(long)]
        decoders: Option<String>,
        /// Fine-tune `--init` on receptive-field crops.
        #[arg(long, requires = "init")]
        patch: bool,
        #[arg(long)]
        init: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Per-class accuracy on a split.
    Evaluate {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Accuracy under each manipulation.
    Robustness {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated manipulation kinds.
        #[arg(long)]
        manipulations: Option<String>,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// One model per decoder, evaluated on every decoder.
    Generalize {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        rep: Option<String>,
        #[arg(long)]
        decoders: Option<String>,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Reliability curve with Wilson intervals.
    Calibrate {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        /// label_agreement or fake_frequency.
        #[arg(long)]
        scoring: Option<String>,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Mean prediction over real/fake fade mixes.
    MixCalibrate {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        decoder: Option<String>,
        /// Comma-separated mixing factors from 0 to 1.
        #[arg(long)]
        lambdas: Option<String>,
        #[arg(long)]
        n_per_lambda: Option<usize>,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Sliding-window attribution map of one audio file.
    Attribute {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        audio: PathBuf,
        /// Reconstruction of `--audio` whose patches are spliced in.
        #[arg(long, requires = "splice")]
        fake: Option<PathBuf>,
        /// Grid cells to splice, `row,col;row,col`.
        #[arg(long, requires = "fake")]
        splice: Option<String>,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        offset_s: Option<f64>,
        #[arg(long)]
        excerpt_s: Option<f64>,
    },
    /// Backpropagation against central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Write a seeded synthetic music corpus.
    SynthCorpus {
        #[arg(long, default_value_t = 200)]
        tracks: usize,
        #[arg(long, default_value_t = 3.0)]
        seconds: f64,
    },
}

/// Parses arguments and runs; returns the process exit code. Failures
/// print a JSON error record on stderr.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let record = serde_json::json!({ "error": e.record() });
            eprintln!("{record}");
            e.exit_code()
        }
    }
}

fn parse<T: std::str::FromStr<Err = sfdetect_core::Error>>(s: &str) -> Result<T> {
    s.parse().map_err(|e: sfdetect_core::Error| Error::Config(e.to_string()))
}

fn parse_list<T: std::str::FromStr<Err = sfdetect_core::Error>>(s: &str) -> Result<Vec<T>> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(parse).collect()
}

fn apply_train_args(cfg: &mut RunConfig, a: &TrainArgs) {
    let t = &mut cfg.train;
    t.steps = a.steps.unwrap_or(t.steps);
    t.batch_size = a.batch_size.unwrap_or(t.batch_size);
    t.lr_initial = a.lr.unwrap_or(t.lr_initial);
    t.validate_every = a.validate_every.unwrap_or(t.validate_every);
    t.validation_excerpts = a.validation_excerpts.unwrap_or(t.validation_excerpts);
    t.patience = a.patience.unwrap_or(t.patience);
    t.target_accuracy = a.target_accuracy.unwrap_or(t.target_accuracy);
    t.excerpt_s = a.excerpt_s.unwrap_or(t.excerpt_s);
}

fn apply_eval_args(cfg: &mut RunConfig, a: &EvalArgs) {
    cfg.eval.excerpts_per_track = a.excerpts_per_track.unwrap_or(cfg.eval.excerpts_per_track);
}

/// Configuration after applying the file and then the flags.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.seed = cli.seed.unwrap_or(cfg.seed);
    cfg.out_dir = cli.out.clone().or(cfg.out_dir);
    cfg.jobs = cli.jobs.or(cfg.jobs);
    cfg.transcoder_path = cli.transcoder.clone().or(cfg.transcoder_path);
    let manifest = match &cli.command {
        Command::Ingest { manifest, .. }
        | Command::Train { manifest, .. }
        | Command::Evaluate { manifest, .. }
        | Command::Robustness { manifest, .. }
        | Command::Generalize { manifest, .. }
        | Command::Calibrate { manifest, .. }
        | Command::MixCalibrate { manifest, .. } => manifest.clone(),
        _ => None,
    };
    cfg.manifest_path = manifest.or(cfg.manifest_path);
    match &cli.command {
        Command::BuildDataset { real, decoders, gl_iters } => {
            cfg.dataset.real_dir = real.clone().or(cfg.dataset.real_dir);
            if let Some(d) = decoders {
                cfg.dataset.decoders = parse_decoders(d).map_err(|e| Error::Config(e.to_string()))?;
            }
            cfg.dataset.griffin_lim_iters = gl_iters.unwrap_or(cfg.dataset.griffin_lim_iters);
        }
        Command::Train { rep, decoders, train, .. } | Command::Generalize { rep, decoders, train, .. } => {
            if let Some(r) = rep {
                cfg.representation = parse(r)?;
            }
            if let Some(d) = decoders {
                cfg.dataset.decoders = parse_decoders(d).map_err(|e| Error::Config(e.to_string()))?;
            }
            apply_train_args(&mut cfg, train);
            if let Command::Generalize { eval, .. } = &cli.command {
                apply_eval_args(&mut cfg, eval);
            }
        }
        Command::Evaluate { eval, .. } | Command::Calibrate { eval, .. } => apply_eval_args(&mut cfg, eval),
        Command::Robustness { manipulations, eval, .. } => {
            if let Some(m) = manipulations {
                cfg.manipulations = parse_list::<ManipulationKind>(m)?;
            }
            apply_eval_args(&mut cfg, eval);
        }
        Command::MixCalibrate { decoder, lambdas, n_per_lambda, eval, .. } => {
            cfg.eval.mix_decoder = decoder.clone().or(cfg.eval.mix_decoder);
            if let Some(l) = lambdas {
                cfg.eval.lambda_grid = l
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad mixing factor '{v}': {e}"))))
                    .collect::<Result<_>>()?;
            }
            cfg.eval.n_per_lambda = n_per_lambda.or(cfg.eval.n_per_lambda);
            apply_eval_args(&mut cfg, eval);
        }
        Command::Attribute { stride, .. } => cfg.eval.attribution_stride = stride.or(cfg.eval.attribution_stride),
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Ctx<'a> {
    cli: &'a Cli,
    cfg: RunConfig,
    seeds: Seeds,
    out: PathBuf,
}

impl Ctx<'_> {
    fn manifest_path(&self) -> Result<PathBuf> {
        self.cfg
            .manifest_path
            .clone()
            .ok_or_else(|| Error::MissingArtifact("no manifest; pass --manifest or set manifest_path".into()))
    }

    fn manifest(&self) -> Result<(sfdetect_core::dataset::Manifest, ClipStore)> {
        let path = self.manifest_path()?;
        let manifest = read_manifest(&path)?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((manifest, ClipStore::new(root)))
    }

    fn transcoder(&self) -> Result<Option<Transcoder>> {
        Transcoder::resolve(self.cfg.transcoder_path.as_deref())
    }

    fn front(&self, params: &ModelParams) -> FrontEnd {
        FrontEnd::for_model(params, self.cfg.stft, self.cfg.cutoff_hz)
    }

    fn eval_options(&self, split: &Option<String>) -> Result<protocols::EvalOptions> {
        let mut o = self.cfg.eval_options(self.seeds);
        if let Some(s) = split {
            o.split = parse::<Split>(s)?;
        }
        Ok(o)
    }

    fn decoders_or_manifest(&self, given: bool, manifest: &sfdetect_core::dataset::Manifest) -> Vec<DecoderId> {
        if given || self.cli.config.is_some() {
            self.cfg.dataset.decoders.clone()
        } else {
            manifest.decoders.iter().filter(|d| manifest.records_for(d, Split::Train).next().is_some()).cloned().collect()
        }
    }

    fn write_run(&self, outputs: &[PathBuf]) -> Result<()> {
        let names = outputs
            .iter()
            .map(|p| p.strip_prefix(&self.out).unwrap_or(p).display().to_string())
            .collect();
        let record = RunRecord {
            toolkit: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command_name(&self.cli.command),
            arguments: serde_json::to_value(&self.cli.command).map_err(|e| Error::json("serializing arguments", e))?,
            config: &self.cfg,
            seeds: self.seeds,
            outputs: names,
        };
        report::write_json(&self.out.join(RUN_FILE), &record)
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::BuildDataset { .. } => "build-dataset",
        Command::Ingest { .. } => "ingest",
        Command::Train { .. } => "train",
        Command::Evaluate { .. } => "evaluate",
        Command::Robustness { .. } => "robustness",
        Command::Generalize { .. } => "generalize",
        Command::Calibrate { .. } => "calibrate",
        Command::MixCalibrate { .. } => "mix-calibrate",
        Command::Attribute { .. } => "attribute",
        Command::Gradcheck { .. } => "gradcheck",
        Command::SynthCorpus { .. } => "synth-corpus",
    }
}

fn parse_cells(s: &str) -> Result<Vec<(usize, usize)>> {
    s.split(';')
        .filter(|c| !c.trim().is_empty())
        .map(|c| {
            let bad = || Error::Config(format!("splice cell '{c}' is not row,col"));
            let (r, k) = c.split_once(',').ok_or_else(bad)?;
            Ok((r.trim().parse().map_err(|_| bad())?, k.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

/// Resolves the configuration and runs the subcommand.
pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    if let Some(n) = cfg.jobs {
        // Fails only when a pool already exists in this process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let seeds = cfg.seeds();
    let out = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let ctx = Ctx { cli, cfg, seeds, out };
    let outputs = dispatch(&ctx)?;
    ctx.write_run(&outputs)
}

fn dispatch(ctx: &Ctx<'_>) -> Result<Vec<PathBuf>> {
    let cfg = &ctx.cfg;
    let out = &ctx.out;
    match &ctx.cli.command {
        Command::BuildDataset { .. } => {
            let real = cfg
                .dataset
                .real_dir
                .clone()
                .ok_or_else(|| Error::MissingArtifact("no real audio; pass --real or set dataset.real_dir".into()))?;
            let opts = BuildOptions {
                stft: cfg.stft,
                griffin_lim_iters: cfg.dataset.griffin_lim_iters,
                render_seed: ctx.seeds.render,
                transcoder: ctx.transcoder()?,
            };
            let (_, build) = build_manifest(&real, out, &cfg.dataset.decoders, ctx.seeds.split, cfg.dataset.fractions, &opts)?;
            let path = out.join("build_report.json");
            report::write_json(&path, &build)?;
            Ok(vec![out.join(MANIFEST_FILE), path])
        }
        Command::Ingest { decoder, fake_dir, .. } => {
            let path = ctx.manifest_path()?;
            let manifest = read_manifest(&path)?;
            let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
            let decoder: DecoderId = parse(decoder)?;
            let (updated, ingest) = ingest_external(&manifest, &root, &decoder, fake_dir)?;
            write_manifest(&path, &updated)?;
            let report_path = out.join("ingest_report.json");
            report::write_json(&report_path, &ingest)?;
            Ok(vec![report_path])
        }
        Command::Train { decoders, patch, init, .. } => {
            let (manifest, store) = ctx.manifest()?;
            let tcfg = cfg.train_config();
            let (params, log) = if *patch {
                let init = checkpoint::load(init.as_deref().expect("clap enforces --init"))?;
                let front = ctx.front(&init);
                train::finetune_patch(&init, &manifest, &store, front, &tcfg)?
            } else {
                let decoders = ctx.decoders_or_manifest(decoders.is_some(), &manifest);
                let arch = (!cfg.arch.is_empty()).then(|| cfg.arch_spec());
                let front = FrontEnd { kind: cfg.representation, stft: cfg.stft, cutoff_hz: cfg.cutoff_hz };
                train::train(&manifest, &store, &decoders, front, arch, &tcfg)?
            };
            let model = out.join(MODEL_FILE);
            checkpoint::save(&model, &params)?;
            let mut files = report::emit_train_log(out, &log)?;
            files.insert(0, model);
            Ok(files)
        }
        Command::Evaluate { model, eval, .. } => {
            let (manifest, store) = ctx.manifest()?;
            let params = checkpoint::load(model)?;
            let acc = protocols::evaluate_accuracy(&params, &manifest, &store, &ctx.front(&params), &ctx.eval_options(&eval.split)?)?;
            report::emit_accuracy(out, &acc)
        }
        Command::Robustness { model, eval, .. } => {
            let (manifest, store) = ctx.manifest()?;
            let params = checkpoint::load(model)?;
            let transcoder = ctx.transcoder()?;
            let reencoder = transcoder.as_ref().map(|t| t as &(dyn Reencoder + Sync));
            let table = protocols::robustness_table(
                &params,
                &manifest,
                &store,
                &ctx.front(&params),
                &cfg.manipulations,
                reencoder,
                &ctx.eval_options(&eval.split)?,
            )?;
            report::emit_robustness(out, &table)
        }
        Command::Generalize { decoders, eval, .. } => {
            let (manifest, store) = ctx.manifest()?;
            let decoders = ctx.decoders_or_manifest(decoders.is_some(), &manifest);
            let arch = (!cfg.arch.is_empty()).then(|| cfg.arch_spec());
            let front = FrontEnd { kind: cfg.representation, stft: cfg.stft, cutoff_hz: cfg.cutoff_hz };
            let (matrix, models) = protocols::generalization_matrix(
                &manifest,
                &store,
                &decoders,
                front,
                arch,
                &cfg.train_config(),
                &ctx.eval_options(&eval.split)?,
            )?;
            let mut files = report::emit_generalization(out, &matrix)?;
            for (d, m) in decoders.iter().zip(&models) {
                if let Some(m) = m {
                    let p = out.join("models").join(format!("{d}.sfm"));
                    checkpoint::save(&p, m)?;
                    files.push(p);
                }
            }
            Ok(files)
        }
        Command::Calibrate { model, scoring, eval, .. } => {
            let (manifest, store) = ctx.manifest()?;
            let params = checkpoint::load(model)?;
            let scoring = match scoring.as_deref() {
                None => cfg.eval.calibration_scoring,
                Some("label_agreement") => CalibrationScoring::LabelAgreement,
                Some("fake_frequency") => CalibrationScoring::FakeFrequency,
                Some(other) => return Err(Error::Config(format!("unknown calibration scoring '{other}'"))),
            };
            let curve =
                protocols::calibration_curve(&params, &manifest, &store, &ctx.front(&params), scoring, &ctx.eval_options(&eval.split)?)?;
            report::emit_calibration(out, &curve)
        }
        Command::MixCalibrate { model, eval, .. } => {
            let (manifest, store) = ctx.manifest()?;
            let params = checkpoint::load(model)?;
            let decoder: DecoderId = match &cfg.eval.mix_decoder {
                Some(d) => parse(d)?,
                None => params
                    .trained_on
                    .first()
                    .cloned()
                    .ok_or_else(|| Error::Config("pass --decoder or set eval.mix_decoder".into()))?,
            };
            let curve = protocols::mixing_curve(
                &params,
                &manifest,
                &store,
                &ctx.front(&params),
                &decoder,
                &cfg.eval.lambda_grid,
                cfg.eval.n_per_lambda,
                &ctx.eval_options(&eval.split)?,
            )?;
            report::emit_mixing(out, &curve)
        }
        Command::Attribute { model, audio, fake, splice, offset_s, excerpt_s, .. } => {
            let params = checkpoint::load(model)?;
            let front = ctx.front(&params);
            let transcoder = ctx.transcoder()?;
            let stride = cfg.eval.attribution_stride.unwrap_or_else(|| (protocols::patch_size(&params) / 2).max(1));
            let prep = |path: &Path| -> Result<sfdetect_core::AudioClip> {
                let clip = load_audio(path, CANONICAL_RATE, transcoder.as_ref())?;
                let start = clip.frames_for(offset_s.unwrap_or(0.0));
                let frames = excerpt_s.map_or(clip.frames().saturating_sub(start), |s| clip.frames_for(s));
                Ok(clip.slice(start, frames)?.to_mono(EVAL_MONO_ALPHA)?.peak_normalize())
            };
            let real = prep(audio)?;
            let source = audio.display().to_string();
            match (fake, splice) {
                (Some(f), Some(cells)) => {
                    let fake = prep(f)?.fit_to(real.frames())?;
                    let demo = protocols::splice_demo(&params, &front, &real, &fake, &parse_cells(cells)?, stride, &source)?;
                    report::emit_splice(out, &demo)
                }
                _ => report::emit_attribution(out, &protocols::attribution(&params, &front, &real, stride, &source)?),
            }
        }
        Command::Gradcheck { trials, tolerance } => {
            let seed = rng::derive(ctx.seeds.root, "gradcheck", 0);
            let rows: Vec<GradCheckRow> = (0..*trials)
                .map(|t| {
                    let (arch, weights, batch) = gradcheck::random_problem(seed, t);
                    let g = gradcheck::check(&arch, &weights, &batch, 1e-5)?;
                    Ok(GradCheckRow::new(t, arch.conv_filters.clone(), &g, *tolerance))
                })
                .collect::<Result<_>>()?;
            let files = report::emit_gradcheck(out, &rows)?;
            let failed = rows.iter().filter(|r| !r.passed).count();
            if failed > 0 {
                ctx.write_run(&files)?;
                return Err(Error::CheckFailed(format!("{failed} of {trials} gradient checks exceed {tolerance}")));
            }
            Ok(files)
        }
        Command::SynthCorpus { tracks, seconds } => {
            let dir = out.join("audio");
            let files = synth::write_corpus(&dir, *tracks, *seconds, rng::derive(ctx.seeds.root, "synth", 0), CANONICAL_RATE)?;
            Ok(files)
        }
    }
}
