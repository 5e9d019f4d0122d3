use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
}

/// Border handling of the same-size convolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    #[default]
    Zero,
    /// Periodic wrap-around; makes the stack equivariant to circular shifts.
    Circular,
}

/// Description of the convolutional detector.
///
/// Inputs are `[in_channels x height x width]`. With `height == 1`
/// (waveforms) the same stack runs with `1 x kernel` filters and `1 x pool`
/// pooling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub conv_filters: Vec<usize>,
    pub kernel: usize,
    pub pool: usize,
    pub hidden_linear: usize,
    pub in_channels: usize,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub padding: Padding,
    /// `true` for waveform inputs (single row, 1-D filters).
    #[serde(default)]
    pub one_dimensional: bool,
}

impl Default for ArchSpec {
    fn default() -> Self {
        Self {
            conv_filters: vec![16, 32, 64, 128, 256, 512],
            kernel: 3,
            pool: 2,
            hidden_linear: 64,
            in_channels: 1,
            activation: Activation::Relu,
            padding: Padding::Zero,
            one_dimensional: false,
        }
    }
}

/// Location of one weight group inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub offset: usize,
    pub len: usize,
}

impl Span {
    pub fn range(self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub c_in: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub weight: Span,
    pub bias: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinearShape {
    pub n_in: usize,
    pub n_out: usize,
    pub weight: Span,
    pub bias: Span,
}

/// Parameter layout: convolutions in order (weights `[c_out x c_in x kh x
/// kw]` then biases), the hidden linear layer, the output layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub convs: Vec<ConvShape>,
    pub hidden: LinearShape,
    pub output: LinearShape,
    pub total: usize,
}

impl ArchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.conv_filters.is_empty() || self.conv_filters.contains(&0) {
            bail!(Argument, "conv_filters must be a non-empty list of positive counts");
        }
        if self.kernel == 0 || self.kernel % 2 == 0 {
            bail!(Argument, "kernel must be odd for same padding, got {}", self.kernel);
        }
        if self.pool < 1 {
            bail!(Argument, "pool must be at least 1");
        }
        if self.hidden_linear == 0 || self.in_channels == 0 {
            bail!(Argument, "hidden_linear and in_channels must be positive");
        }
        Ok(())
    }

    pub fn kernel_hw(&self) -> (usize, usize) {
        if self.one_dimensional {
            (1, self.kernel)
        } else {
            (self.kernel, self.kernel)
        }
    }

    pub fn pool_hw(&self) -> (usize, usize) {
        if self.one_dimensional {
            (1, self.pool)
        } else {
            (self.pool, self.pool)
        }
    }

    pub fn layout(&self) -> Layout {
        let (kh, kw) = self.kernel_hw();
        let mut offset = 0;
        let mut take = |len: usize| {
            let s = Span { offset, len };
            offset += len;
            s
        };
        let mut convs = Vec::with_capacity(self.conv_filters.len());
        let mut c_in = self.in_channels;
        for &c_out in &self.conv_filters {
            let weight = take(c_out * c_in * kh * kw);
            let bias = take(c_out);
            convs.push(ConvShape { c_in, c_out, kh, kw, weight, bias });
            c_in = c_out;
        }
        let h = self.hidden_linear;
        let hidden = LinearShape { n_in: c_in, n_out: h, weight: take(h * c_in), bias: take(h) };
        let output = LinearShape { n_in: h, n_out: 1, weight: take(h), bias: take(1) };
        Layout { convs, hidden, output, total: offset }
    }

    /// Closed form `sum(k^d * c_in * c_out + c_out) + (c_last * h + h) + (h + 1)`.
    pub fn param_count(&self) -> usize {
        let (kh, kw) = self.kernel_hw();
        let mut c_in = self.in_channels;
        let mut total = 0;
        for &c_out in &self.conv_filters {
            total += kh * kw * c_in * c_out + c_out;
            c_in = c_out;
        }
        total + c_in * self.hidden_linear + self.hidden_linear + self.hidden_linear + 1
    }

    /// Parameters of the convolutional stack alone.
    pub fn conv_param_count(&self) -> usize {
        self.layout().convs.iter().map(|c| c.weight.len + c.bias.len).sum()
    }

    /// Receptive field along one spatial axis: `r += (k - 1) * j` for each
    /// convolution, `r += (p - 1) * j; j *= p` for each pooling.
    pub fn receptive_field(&self) -> usize {
        let (mut r, mut j) = (1, 1);
        for _ in &self.conv_filters {
            r += (self.kernel - 1) * j;
            r += (self.pool - 1) * j;
            j *= self.pool;
        }
        r
    }

    /// Product of the pooling strides; the smallest input side that survives
    /// every pooling stage.
    pub fn total_stride(&self) -> usize {
        self.pool.pow(self.conv_filters.len() as u32)
    }

    /// Minimum `(height, width)` accepted by the forward pass.
    pub fn min_input(&self) -> (usize, usize) {
        let s = self.total_stride();
        if self.one_dimensional {
            (1, s)
        } else {
            (s, s)
        }
    }

    /// Spatial size after each conv+pool stage.
    pub fn stage_sizes(&self, height: usize, width: usize) -> Vec<(usize, usize)> {
        let (ph, pw) = self.pool_hw();
        let mut sizes = Vec::with_capacity(self.conv_filters.len() + 1);
        let (mut h, mut w) = (height, width);
        sizes.push((h, w));
        for _ in &self.conv_filters {
            h /= ph;
            w /= pw;
            sizes.push((h, w));
        }
        sizes
    }
}
