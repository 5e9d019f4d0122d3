use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float as _;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    /// `lr = lr_initial * factor^floor(step / every)`.
    StepDecay { factor: f64, every: usize },
}

impl LrSchedule {
    /// Halves the rate every fifth of the run.
    pub fn default_for(steps: usize) -> Self {
        LrSchedule::StepDecay { factor: 0.5, every: (steps / 5).max(1) }
    }

    pub fn lr(&self, lr_initial: f64, step: usize) -> f64 {
        match *self {
            LrSchedule::StepDecay { factor, every } => lr_initial * factor.powi((step / every.max(1)) as i32),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Training hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub steps: usize,
    pub lr_initial: f64,
    pub lr_schedule: Option<LrSchedule>,
    pub optimizer: OptimizerKind,
    pub excerpt_s: f64,
    pub fake_prob: f64,
    pub seed: u64,
    /// Validation cadence in steps.
    pub validate_every: usize,
    /// Excerpts per class drawn for each validation pass.
    pub validation_excerpts: usize,
    /// Stop after this many validations without improvement; 0 disables.
    pub patience: usize,
    /// Stop once validation accuracy reaches this value; values above 1 disable.
    pub target_accuracy: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            steps: 50_000,
            lr_initial: 1e-3,
            lr_schedule: None,
            optimizer: OptimizerKind::default(),
            excerpt_s: 0.8,
            fake_prob: 0.5,
            seed: 0,
            validate_every: 500,
            validation_excerpts: 64,
            patience: 0,
            target_accuracy: 2.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fake_prob > 0.0 && self.fake_prob < 1.0) {
            bail!(Config, "fake_prob must lie in (0, 1), got {}", self.fake_prob);
        }
        if !(self.lr_initial > 0.0) {
            bail!(Config, "lr_initial must be positive, got {}", self.lr_initial);
        }
        if self.batch_size == 0 || self.steps == 0 {
            bail!(Config, "batch_size and steps must be positive");
        }
        if !(self.excerpt_s > 0.0) {
            bail!(Config, "excerpt_s must be positive");
        }
        if self.validate_every == 0 {
            bail!(Config, "validate_every must be positive");
        }
        if let Some(LrSchedule::StepDecay { factor, every }) = self.lr_schedule {
            if !(factor > 0.0 && factor <= 1.0) || every == 0 {
                bail!(Config, "step decay needs factor in (0, 1] and every > 0");
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> LrSchedule {
        self.lr_schedule.unwrap_or_else(|| LrSchedule::default_for(self.steps))
    }

    pub fn lr_at(&self, step: usize) -> f64 {
        self.schedule().lr(self.lr_initial, step)
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f32>,
    v: Vec<f32>,
    t: u64,
}

impl Adam {
    pub fn new(kind: OptimizerKind, n: usize) -> Self {
        let OptimizerKind::Adam { beta1, beta2, eps } = kind;
        Self { beta1, beta2, eps, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, weights: &mut [f32], grads: &[f32], lr: f64) {
        assert!(weights.len() == self.m.len() && grads.len() == self.m.len(), "optimizer size mismatch");
        self.t += 1;
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        let step = (lr * c2.sqrt() / c1) as f32;
        let eps = (self.eps * c2.sqrt()) as f32;
        for i in 0..weights.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            weights[i] -= step * self.m[i] / (self.v[i].sqrt() + eps);
        }
    }
}
