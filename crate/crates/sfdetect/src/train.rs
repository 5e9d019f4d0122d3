//! Detector training: full-size excerpts, and receptive-field patch
//! fine-tuning.
//!
//! Example `i` of step `s` is generated from its own stream
//! `derive(seed, "train-example", s * batch + i)`, and per-example gradients
//! are reduced in fixed chunks summed in order. Logs and checkpoints are
//! therefore identical for any number of worker threads.

use std::sync::Arc;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sfdetect_core::dataset::{DecoderId, Manifest, Split, TrackRecord};
use sfdetect_core::eval::{ClassAccuracy, Scored, THRESHOLD};
use sfdetect_core::net::{crop_offset, Adam, ArchSpec, ClassSampler, Draw, ModelParams, Network, Tensor, TrainConfig};
use sfdetect_core::rng::{self, Rng};
use sfdetect_core::{AudioClip, CANONICAL_RATE};

use crate::error::{Error, Result};
use crate::pipeline::{ClipStore, FrontEnd, EVAL_MONO_ALPHA};

/// Examples per gradient partial sum.
const GRAD_CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationLog {
    pub step: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub steps: Vec<StepLog>,
    pub validations: Vec<ValidationLog>,
    /// Step of the returned weights.
    pub best_step: usize,
    pub best_accuracy: Option<f64>,
    pub stop_reason: String,
}

/// Square crop side for patch fine-tuning; `None` trains on whole excerpts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Full,
    Patch(usize),
}

struct Pools {
    decoders: Vec<DecoderId>,
    reals: Vec<TrackRecord>,
    fakes: Vec<Vec<TrackRecord>>,
}

fn dataset_error(msg: String) -> Error {
    Error::Core(sfdetect_core::Error::Dataset(msg))
}

fn pools(manifest: &Manifest, decoders: &[DecoderId], split: Split) -> Pools {
    Pools {
        decoders: decoders.to_vec(),
        reals: manifest.reals(split).cloned().collect(),
        fakes: decoders.iter().map(|d| manifest.records_for(d, split).cloned().collect()).collect(),
    }
}

fn train_pools(manifest: &Manifest, decoders: &[DecoderId]) -> Result<Pools> {
    if decoders.is_empty() {
        return Err(Error::Config("training needs at least one fake decoder".into()));
    }
    let p = pools(manifest, decoders, Split::Train);
    if p.reals.is_empty() {
        return Err(dataset_error("no real tracks in the train split".into()));
    }
    for (d, f) in decoders.iter().zip(&p.fakes) {
        if f.is_empty() {
            return Err(dataset_error(format!("no '{d}' tracks in the train split")));
        }
    }
    Ok(p)
}

struct Sampler<'a> {
    store: &'a ClipStore,
    front: FrontEnd,
    mode: Mode,
    excerpt_s: f64,
}

impl Sampler<'_> {
    fn input(&self, clip: &AudioClip, excerpt_seed: u64, alpha: f64, r: &mut Rng) -> Result<Tensor<f32>> {
        let t = self.front.tensor(&self.front.excerpt(clip, self.excerpt_s, excerpt_seed, alpha)?)?;
        match self.mode {
            Mode::Full => Ok(t),
            Mode::Patch(size) => {
                let h = size.min(t.height);
                let (y, x) = crop_offset(t.height, t.width, h, size, r)?;
                Ok(t.crop(y, x, h, size)?)
            }
        }
    }

    fn clip(&self, record: &TrackRecord) -> Result<Arc<AudioClip>> {
        self.store.get(record)
    }
}

fn training_example(s: &Sampler<'_>, p: &Pools, classes: &ClassSampler, seed: u64, index: u64) -> Result<(Tensor<f32>, f64)> {
    let mut r = rng::derive_rng(seed, "train-example", index);
    let (record, label) = match classes.draw(&mut r) {
        Draw::Real => (&p.reals[r.random_range(0..p.reals.len())], 0.0),
        Draw::Fake(d) => (&p.fakes[d][r.random_range(0..p.fakes[d].len())], 1.0),
    };
    let excerpt_seed: u64 = r.random();
    let alpha: f64 = r.random();
    Ok((s.input(&*s.clip(record)?, excerpt_seed, alpha, &mut r)?, label))
}

/// Fixed validation inputs: `per_class` excerpts per class, cycling over
/// the class's validation tracks.
fn validation_set(s: &Sampler<'_>, p: &Pools, per_class: usize, seed: u64) -> Result<Vec<(Tensor<f32>, DecoderId)>> {
    let mut jobs: Vec<(&TrackRecord, DecoderId, u64)> = Vec::new();
    let classes = std::iter::once((DecoderId::real(), &p.reals)).chain(p.decoders.iter().cloned().zip(&p.fakes));
    for (class, tracks) in classes {
        if tracks.is_empty() {
            continue;
        }
        for i in 0..per_class {
            jobs.push((&tracks[i % tracks.len()], class.clone(), i as u64));
        }
    }
    jobs.into_par_iter()
        .map(|(record, class, i)| {
            let mut r = rng::derive_rng(seed, &format!("valid-excerpt/{class}"), i);
            let excerpt_seed: u64 = r.random();
            Ok((s.input(&*s.clip(record)?, excerpt_seed, EVAL_MONO_ALPHA, &mut r)?, class))
        })
        .collect()
}

fn validation_accuracy(arch: &ArchSpec, weights: &[f32], set: &[(Tensor<f32>, DecoderId)]) -> Result<f64> {
    let net = Network::new(arch, weights)?;
    let scores: Vec<Scored> = set
        .par_iter()
        .map(|(x, d)| {
            let z = f64::from(net.logit(x)?);
            Ok(Scored { decoder: d.clone(), p_fake: sfdetect_core::net::logistic(z) })
        })
        .collect::<Result<_>>()?;
    let classes: Vec<DecoderId> = Vec::new();
    Ok(ClassAccuracy::from_scores(&scores, &classes, THRESHOLD).overall.unwrap_or(0.0))
}

fn run(mut params: ModelParams, p: &Pools, s: &Sampler<'_>, tcfg: &TrainConfig, valid: &Pools) -> Result<(ModelParams, TrainLog)> {
    tcfg.validate()?;
    let classes = ClassSampler::new(tcfg.fake_prob, p.decoders.len())?;
    let val_set = validation_set(s, valid, tcfg.validation_excerpts, tcfg.seed)?;
    let n = params.weights.len();
    let mut adam = Adam::new(tcfg.optimizer, n);
    let mut log = TrainLog { steps: Vec::new(), validations: Vec::new(), best_step: 0, best_accuracy: None, stop_reason: "steps".into() };
    let mut best = params.weights.clone();
    let mut since_best = 0usize;
    let b = tcfg.batch_size;
    for step in 0..tcfg.steps {
        let batch: Vec<(Tensor<f32>, f64)> = (0..b)
            .into_par_iter()
            .map(|i| training_example(s, p, &classes, tcfg.seed, (step * b + i) as u64))
            .collect::<Result<_>>()?;
        let net = Network::new(&params.arch, &params.weights)?;
        let partials: Vec<(f64, Vec<f32>)> = batch
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| {
                let samples: Vec<(&Tensor<f32>, f64)> = chunk.iter().map(|(x, y)| (x, *y)).collect();
                let mut g = vec![0f32; n];
                let loss = net.accumulate_gradient(&samples, b, &mut g)?;
                Ok((loss, g))
            })
            .collect::<Result<_>>()?;
        let mut grads = vec![0f32; n];
        let mut loss = 0.0;
        for (l, g) in &partials {
            loss += l;
            grads.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        let lr = tcfg.lr_at(step);
        adam.step(&mut params.weights, &grads, lr);
        let done = step + 1;
        log.steps.push(StepLog { step: done, loss, lr });
        if done % 50 == 0 {
            log::info!("step {done}/{}: loss {loss:.4}, lr {lr:.2e}", tcfg.steps);
        }
        if val_set.is_empty() || (done % tcfg.validate_every != 0 && done != tcfg.steps) {
            continue;
        }
        let acc = validation_accuracy(&params.arch, &params.weights, &val_set)?;
        log.validations.push(ValidationLog { step: done, accuracy: acc });
        log::info!("step {done}: validation accuracy {acc:.4}");
        // Ties go to the later, longer-trained weights.
        if log.best_accuracy.map_or(true, |b| acc >= b) {
            log.best_accuracy = Some(acc);
            log.best_step = done;
            best.clone_from(&params.weights);
            since_best = 0;
        } else {
            since_best += 1;
        }
        if acc >= tcfg.target_accuracy {
            log.stop_reason = "target_accuracy".into();
            break;
        }
        if tcfg.patience > 0 && since_best >= tcfg.patience {
            log.stop_reason = "patience".into();
            break;
        }
    }
    if val_set.is_empty() {
        log.best_step = log.steps.len();
    } else {
        params.weights = best;
    }
    Ok((params, log))
}

/// Trains a detector from scratch on real vs `decoders`, returning the
/// best-validation weights.
pub fn train(
    manifest: &Manifest,
    store: &ClipStore,
    decoders: &[DecoderId],
    front: FrontEnd,
    arch: Option<ArchSpec>,
    tcfg: &TrainConfig,
) -> Result<(ModelParams, TrainLog)> {
    tcfg.validate()?;
    let p = train_pools(manifest, decoders)?;
    let mut init = match arch {
        Some(a) => ModelParams::init(a, front.kind, tcfg.seed)?,
        None => ModelParams::default_for(front.kind, tcfg.seed)?,
    };
    init.trained_on = decoders.to_vec();
    let sampler = Sampler { store, front, mode: Mode::Full, excerpt_s: tcfg.excerpt_s };
    run(init, &p, &sampler, tcfg, &pools(manifest, decoders, Split::Valid))
}

/// Continues training `params` on random crops whose side equals the
/// receptive field. Excerpts are lengthened when `tcfg.excerpt_s` is too
/// short to yield a crop-wide representation.
pub fn finetune_patch(
    params: &ModelParams,
    manifest: &Manifest,
    store: &ClipStore,
    front: FrontEnd,
    tcfg: &TrainConfig,
) -> Result<(ModelParams, TrainLog)> {
    params.validate()?;
    if front.kind != params.representation {
        return Err(Error::Config(format!("model reads {} inputs, front end produces {}", params.representation, front.kind)));
    }
    let size = params.arch.receptive_field();
    let height = match front.kind {
        sfdetect_core::dsp::RepKind::Waveform => size,
        _ => sfdetect_core::dsp::retained_bins(&front.stft, CANONICAL_RATE, front.cutoff_hz),
    };
    if !params.arch.one_dimensional && height < size {
        return Err(Error::Core(sfdetect_core::Error::Length(format!(
            "{height}-bin representation is smaller than the {size}-pixel patch"
        ))));
    }
    let p = train_pools(manifest, &params.trained_on)?;
    let excerpt_s = tcfg.excerpt_s.max(front.excerpt_s_for_columns(size, CANONICAL_RATE));
    let sampler = Sampler { store, front, mode: Mode::Patch(size), excerpt_s };
    let (mut tuned, log) = run(params.clone(), &p, &sampler, tcfg, &pools(manifest, &params.trained_on, Split::Valid))?;
    tuned.patch_size = Some(size);
    Ok((tuned, log))
}
