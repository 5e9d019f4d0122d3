use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[cfg(not(feature = "std"))]
use num_traits::Float as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::arch::{ArchSpec, Layout};
use super::layers::{col2im, im2col, relu_maxpool, relu_maxpool_backward, relu_maxpool_margin};
use super::scalar::{gemm, Scalar, View};
use crate::dataset::DecoderId;
use crate::dsp::{RepKind, SpectralRep};
use crate::error::{bail, Result};
use crate::rng;

/// Dense `[channels x height x width]` network input.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != channels * height * width {
            bail!(Shape, "tensor data has {} values, expected {channels}x{height}x{width}", data.len());
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width, data: vec![T::zero(); channels * height * width] }
    }

    pub fn at(&self, c: usize, y: usize, x: usize) -> T {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Window `[row..row+h) x [col..col+w)` of every channel.
    pub fn crop(&self, row: usize, col: usize, h: usize, w: usize) -> Result<Self> {
        if row + h > self.height || col + w > self.width {
            bail!(Length, "crop {h}x{w} at ({row}, {col}) exceeds {}x{}", self.height, self.width);
        }
        let mut data = Vec::with_capacity(self.channels * h * w);
        for c in 0..self.channels {
            for y in row..row + h {
                let start = (c * self.height + y) * self.width + col;
                data.extend_from_slice(&self.data[start..start + w]);
            }
        }
        Ok(Self { channels: self.channels, height: h, width: w, data })
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor { channels: self.channels, height: self.height, width: self.width, data: self.data.iter().map(|v| U::of(v.as_f64())).collect() }
    }
}

/// Fixed input scaling applied before the first convolution: decibel
/// planes map `-20 dB -> 0` at 20 dB per unit; phases are divided by pi;
/// complex planes are compressed with `asinh(x) / 4`; waveforms pass as is.
pub fn normalize_value(kind: RepKind, plane: usize, v: f32) -> f32 {
    match (kind, plane) {
        (RepKind::Amplitude, _) | (RepKind::Polar, 0) => (v + 20.0) / 20.0,
        (RepKind::Phase, _) | (RepKind::Polar, _) => v / PI as f32,
        (RepKind::Complex, _) => v.asinh() / 4.0,
        (RepKind::Waveform, _) => v,
    }
}

/// Network input for a representation.
pub fn input_tensor(rep: &SpectralRep) -> Tensor<f32> {
    let plane = rep.height * rep.width;
    let data = rep.data.iter().enumerate().map(|(i, &v)| normalize_value(rep.kind, i / plane.max(1), v)).collect();
    Tensor { channels: rep.channels, height: rep.height, width: rep.width, data }
}

/// Detector output; label 1 is fake.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub p_fake: f64,
    pub logit: f64,
}

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Prediction {
    pub fn from_logit(logit: f64) -> Self {
        Self { p_fake: logistic(logit), logit }
    }
}

/// `softplus(z) - y z`, the binary cross-entropy of a logit.
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - y * z + (-z.abs()).exp().ln_1p()
}

struct StageCache<T> {
    h: usize,
    w: usize,
    cols: Vec<T>,
    argmax: Vec<u32>,
}

/// Activations retained by a training forward pass.
pub struct ForwardCache<T> {
    stages: Vec<StageCache<T>>,
    final_hw: usize,
    pooled: Vec<T>,
    hidden_pre: Vec<T>,
    hidden: Vec<T>,
    pub logit: T,
}

/// Forward and backward passes over a flat weight vector laid out by
/// [`ArchSpec::layout`].
pub struct Network<'a, T> {
    pub arch: &'a ArchSpec,
    pub layout: Layout,
    pub weights: &'a [T],
}

impl<'a, T: Scalar> Network<'a, T> {
    pub fn new(arch: &'a ArchSpec, weights: &'a [T]) -> Result<Self> {
        arch.validate()?;
        let layout = arch.layout();
        if weights.len() != layout.total {
            bail!(Shape, "architecture needs {} weights, got {}", layout.total, weights.len());
        }
        Ok(Self { arch, layout, weights })
    }

    pub fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.channels != self.arch.in_channels {
            bail!(Shape, "network expects {} input channels, got {}", self.arch.in_channels, x.channels);
        }
        let (mh, mw) = self.arch.min_input();
        if x.height < mh || x.width < mw {
            bail!(Shape, "input {}x{} is smaller than the minimum {mh}x{mw}", x.height, x.width);
        }
        if self.arch.one_dimensional && x.height != 1 {
            bail!(Shape, "1-D network expects a single row, got {}", x.height);
        }
        Ok(())
    }

    /// Forward pass; `margin`, when given, receives the distance of the
    /// input to the nearest ReLU or max-pooling kink.
    fn run(&self, x: &Tensor<T>, keep: bool, mut margin: Option<&mut f64>) -> Result<ForwardCache<T>> {
        self.check_input(x)?;
        let (ph, pw) = self.arch.pool_hw();
        let padding = self.arch.padding;
        let mut act = x.data.clone();
        let (mut h, mut w) = (x.height, x.width);
        let mut stages = Vec::with_capacity(self.layout.convs.len());
        let mut cols = Vec::new();
        let mut pre = Vec::new();
        let mut pooled = Vec::new();
        for conv in &self.layout.convs {
            let hw = h * w;
            let k = conv.c_in * conv.kh * conv.kw;
            im2col(&act, conv.c_in, h, w, conv.kh, conv.kw, padding, &mut cols);
            pre.clear();
            for &b in &self.weights[conv.bias.range()] {
                pre.extend(core::iter::repeat(b).take(hw));
            }
            gemm(conv.c_out, k, hw, &self.weights[conv.weight.range()], View::rows(k), &cols, View::rows(hw), T::one(), &mut pre, View::rows(hw));
            if let Some(m) = margin.as_deref_mut() {
                *m = m.min(relu_maxpool_margin(&pre, conv.c_out, h, w, ph, pw));
            }
            let mut argmax = Vec::new();
            let (oh, ow) = relu_maxpool(&pre, conv.c_out, h, w, ph, pw, &mut pooled, keep.then_some(&mut argmax));
            if keep {
                stages.push(StageCache { h, w, cols: core::mem::take(&mut cols), argmax });
            }
            core::mem::swap(&mut act, &mut pooled);
            h = oh;
            w = ow;
        }
        let c_last = self.layout.hidden.n_in;
        let hw = h * w;
        let scale = T::of(1.0 / hw as f64);
        let gap: Vec<T> = (0..c_last).map(|c| act[c * hw..(c + 1) * hw].iter().copied().sum::<T>() * scale).collect();
        let hid = &self.layout.hidden;
        let w1 = &self.weights[hid.weight.range()];
        let b1 = &self.weights[hid.bias.range()];
        let hidden_pre: Vec<T> =
            (0..hid.n_out).map(|j| b1[j] + w1[j * c_last..(j + 1) * c_last].iter().zip(&gap).map(|(a, b)| *a * *b).sum::<T>()).collect();
        if let Some(m) = margin {
            *m = hidden_pre.iter().fold(*m, |acc, v| acc.min(v.as_f64().abs()));
        }
        let hidden: Vec<T> = hidden_pre.iter().map(|&v| v.max(T::zero())).collect();
        let out = &self.layout.output;
        let w2 = &self.weights[out.weight.range()];
        let logit = self.weights[out.bias.offset] + w2.iter().zip(&hidden).map(|(a, b)| *a * *b).sum::<T>();
        Ok(ForwardCache { stages, final_hw: hw, pooled: gap, hidden_pre, hidden, logit })
    }

    pub fn logit(&self, x: &Tensor<T>) -> Result<T> {
        Ok(self.run(x, false, None)?.logit)
    }

    /// Distance of `x` to the nearest non-differentiable point of the
    /// network, measured on pre-activations.
    pub fn kink_margin(&self, x: &Tensor<T>) -> Result<f64> {
        let mut m = f64::INFINITY;
        self.run(x, false, Some(&mut m))?;
        Ok(m)
    }

    pub fn forward_train(&self, x: &Tensor<T>) -> Result<ForwardCache<T>> {
        self.run(x, true, None)
    }

    /// Adds `dlogit * d(logit)/d(weights)` into `grads`.
    pub fn backward(&self, cache: &ForwardCache<T>, dlogit: T, grads: &mut [T]) {
        assert_eq!(grads.len(), self.layout.total, "gradient buffer size");
        let out = &self.layout.output;
        let hid = &self.layout.hidden;
        grads[out.bias.offset] += dlogit;
        let w2 = &self.weights[out.weight.range()];
        let mut dhidden = vec![T::zero(); hid.n_out];
        for j in 0..hid.n_out {
            grads[out.weight.offset + j] += dlogit * cache.hidden[j];
            dhidden[j] = if cache.hidden_pre[j] > T::zero() { dlogit * w2[j] } else { T::zero() };
        }
        let c_last = hid.n_in;
        let w1 = &self.weights[hid.weight.range()];
        let mut dgap = vec![T::zero(); c_last];
        for j in 0..hid.n_out {
            let g = dhidden[j];
            if g == T::zero() {
                continue;
            }
            grads[hid.bias.offset + j] += g;
            let row = &w1[j * c_last..(j + 1) * c_last];
            let grow = &mut grads[hid.weight.offset + j * c_last..][..c_last];
            for c in 0..c_last {
                grow[c] += g * cache.pooled[c];
                dgap[c] += g * row[c];
            }
        }
        let hw = cache.final_hw;
        let scale = T::of(1.0 / hw as f64);
        let mut dact: Vec<T> = dgap.iter().flat_map(|&g| core::iter::repeat(g * scale).take(hw)).collect();
        let mut dpre = Vec::new();
        let mut dcols = Vec::new();
        for (li, (conv, stage)) in self.layout.convs.iter().zip(&cache.stages).enumerate().rev() {
            let hw = stage.h * stage.w;
            let k = conv.c_in * conv.kh * conv.kw;
            relu_maxpool_backward(&dact, &stage.argmax, &mut dpre, conv.c_out * hw);
            let gb = &mut grads[conv.bias.range()];
            for co in 0..conv.c_out {
                gb[co] += dpre[co * hw..(co + 1) * hw].iter().copied().sum::<T>();
            }
            gemm(conv.c_out, hw, k, &dpre, View::rows(hw), &stage.cols, View::transposed(hw), T::one(), &mut grads[conv.weight.range()], View::rows(k));
            if li == 0 {
                break;
            }
            dcols.clear();
            dcols.resize(k * hw, T::zero());
            gemm(k, conv.c_out, hw, &self.weights[conv.weight.range()], View::transposed(k), &dpre, View::rows(hw), T::zero(), &mut dcols, View::rows(hw));
            dact.clear();
            dact.resize(conv.c_in * hw, T::zero());
            col2im(&dcols, conv.c_in, stage.h, stage.w, conv.kh, conv.kw, self.arch.padding, &mut dact);
        }
    }

    /// Mean binary cross-entropy over `batch` and its exact gradient.
    pub fn loss_and_gradient(&self, batch: &[(&Tensor<T>, f64)]) -> Result<(f64, Vec<T>)> {
        let mut grads = vec![T::zero(); self.layout.total];
        let loss = self.accumulate_gradient(batch, batch.len(), &mut grads)?;
        Ok((loss, grads))
    }

    /// Adds the gradient of `sum(bce) / denominator` over `samples` into
    /// `grads`; returns the summed loss divided by `denominator`.
    pub fn accumulate_gradient(&self, samples: &[(&Tensor<T>, f64)], denominator: usize, grads: &mut [T]) -> Result<f64> {
        if denominator == 0 {
            bail!(Argument, "empty batch");
        }
        let mut loss = 0.0;
        for (x, y) in samples {
            if !(0.0..=1.0).contains(y) {
                bail!(Argument, "label {y} outside [0, 1]");
            }
            let cache = self.forward_train(x)?;
            let z = cache.logit.as_f64();
            loss += bce_with_logit(z, *y);
            let dz = T::of((logistic(z) - y) / denominator as f64);
            self.backward(&cache, dz, grads);
        }
        Ok(loss / denominator as f64)
    }
}

/// Trained detector with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub arch: ArchSpec,
    #[serde(skip)]
    pub weights: Vec<f32>,
    pub rng_seed: u64,
    pub trained_on: Vec<DecoderId>,
    pub representation: RepKind,
    /// Side of the square crops used for patch fine-tuning, if any.
    #[serde(default)]
    pub patch_size: Option<usize>,
}

impl ModelParams {
    /// He-normal convolution and hidden weights, zero biases.
    pub fn init(arch: ArchSpec, representation: RepKind, seed: u64) -> Result<Self> {
        arch.validate()?;
        if arch.in_channels != representation.channels() {
            bail!(Argument, "{representation} has {} planes, architecture takes {}", representation.channels(), arch.in_channels);
        }
        if (representation == RepKind::Waveform) != arch.one_dimensional {
            bail!(Argument, "waveform inputs need the 1-D architecture and only they use it");
        }
        let layout = arch.layout();
        let mut weights = vec![0f32; layout.total];
        let mut r = rng::derive_rng(seed, "net-init", 0);
        let mut fill = |span: super::arch::Span, fan_in: usize| {
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            for w in &mut weights[span.range()] {
                *w = normal.sample(&mut r) as f32;
            }
        };
        for conv in &layout.convs {
            fill(conv.weight, conv.c_in * conv.kh * conv.kw);
        }
        fill(layout.hidden.weight, layout.hidden.n_in);
        fill(layout.output.weight, layout.output.n_in);
        Ok(Self { arch, weights, rng_seed: seed, trained_on: Vec::new(), representation, patch_size: None })
    }

    pub fn default_for(representation: RepKind, seed: u64) -> Result<Self> {
        let arch = ArchSpec {
            in_channels: representation.channels(),
            one_dimensional: representation == RepKind::Waveform,
            ..ArchSpec::default()
        };
        Self::init(arch, representation, seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        let expected = self.arch.param_count();
        if self.weights.len() != expected {
            bail!(Shape, "model holds {} weights, architecture needs {expected}", self.weights.len());
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            bail!(Argument, "model weights must be finite");
        }
        Ok(())
    }

    pub fn network(&self) -> Result<Network<'_, f32>> {
        Network::new(&self.arch, &self.weights)
    }

    pub fn predict_tensor(&self, x: &Tensor<f32>) -> Result<Prediction> {
        Ok(Prediction::from_logit(f64::from(self.network()?.logit(x)?)))
    }

    pub fn predict(&self, rep: &SpectralRep) -> Result<Prediction> {
        if rep.kind != self.representation {
            bail!(Argument, "model reads {} inputs, got {}", self.representation, rep.kind);
        }
        self.predict_tensor(&input_tensor(rep))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn tiny(padding: super::super::arch::Padding) -> ArchSpec {
        ArchSpec { conv_filters: vec![3, 4], hidden_linear: 5, padding, ..ArchSpec::default() }
    }

    fn random_tensor(c: usize, h: usize, w: usize, seed: u64) -> Tensor<f64> {
        let mut r = rng::rng_from(seed);
        Tensor::new(c, h, w, (0..c * h * w).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn random_weights(arch: &ArchSpec, seed: u64) -> Vec<f64> {
        let mut r = rng::rng_from(seed);
        (0..arch.param_count()).map(|_| r.random_range(-0.5..0.5)).collect()
    }

    #[test]
    fn zero_weights_give_one_half() {
        let arch = ArchSpec::default();
        let w = vec![0f32; arch.param_count()];
        let net = Network::new(&arch, &w).unwrap();
        let x = Tensor::new(1, 64, 64, (0..4096).map(|i| (i % 7) as f32).collect()).unwrap();
        assert_eq!(logistic(f64::from(net.logit(&x).unwrap())), 0.5);
    }

    #[test]
    fn logistic_is_antisymmetric() {
        for z in [-40.0, -3.0, -0.1, 0.0, 0.7, 12.0, 800.0] {
            assert!((logistic(z) + logistic(-z) - 1.0).abs() < 1e-15);
        }
        assert!(bce_with_logit(800.0, 1.0).abs() < 1e-12);
        assert!((bce_with_logit(0.0, 1.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_shapes() {
        let arch = tiny(Default::default());
        let w = random_weights(&arch, 1);
        let net = Network::new(&arch, &w).unwrap();
        assert!(net.logit(&random_tensor(2, 8, 8, 0)).is_err());
        assert!(net.logit(&random_tensor(1, 3, 8, 0)).is_err());
        assert!(Network::new(&arch, &w[1..]).is_err());
    }

    #[test]
    fn circular_shift_by_total_stride_is_invariant() {
        let arch = tiny(super::super::arch::Padding::Circular);
        let w = random_weights(&arch, 2);
        let net = Network::new(&arch, &w).unwrap();
        let x = random_tensor(1, 8, 12, 3);
        let s = arch.total_stride();
        for (sy, sx) in [(s, 0), (0, s), (s, 2 * s)] {
            let mut shifted = Tensor::zeros(1, 8, 12);
            for y in 0..8 {
                for xx in 0..12 {
                    shifted.data[((y + sy) % 8) * 12 + (xx + sx) % 12] = x.at(0, y, xx);
                }
            }
            assert!((net.logit(&x).unwrap() - net.logit(&shifted).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_sample_does_not_double_gradient() {
        let arch = tiny(Default::default());
        let w = random_weights(&arch, 4);
        let net = Network::new(&arch, &w).unwrap();
        let x = random_tensor(1, 9, 10, 5);
        let (l1, g1) = net.loss_and_gradient(&[(&x, 1.0)]).unwrap();
        let (l2, g2) = net.loss_and_gradient(&[(&x, 1.0), (&x, 1.0)]).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        assert!(g1.iter().zip(&g2).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn zero_weights_balanced_labels_are_stationary() {
        let arch = tiny(Default::default());
        let w = vec![0.0; arch.param_count()];
        let net = Network::new(&arch, &w).unwrap();
        let x = random_tensor(1, 8, 8, 6);
        let (_, g) = net.loss_and_gradient(&[(&x, 1.0), (&x, 0.0)]).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn init_matches_representation() {
        let m = ModelParams::default_for(RepKind::Polar, 1).unwrap();
        assert_eq!(m.arch.in_channels, 2);
        m.validate().unwrap();
        assert!(ModelParams::init(ArchSpec::default(), RepKind::Complex, 1).is_err());
        assert_eq!(ModelParams::default_for(RepKind::Amplitude, 9).unwrap(), ModelParams::default_for(RepKind::Amplitude, 9).unwrap());
    }

    #[test]
    fn crop_extracts_window() {
        let x = random_tensor(2, 5, 6, 7);
        let c = x.crop(1, 2, 3, 4).unwrap();
        assert_eq!(c.at(1, 2, 3), x.at(1, 3, 5));
        assert!(x.crop(3, 0, 3, 1).is_err());
    }
}
