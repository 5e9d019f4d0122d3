//! The compact convolutional detector.
//!
//! Six `[conv 3x3 same -> ReLU -> max-pool 2]` stages, global average
//! pooling and a two-layer head produce one logit; `p_fake` is its logistic.
//! Global pooling makes the network size-agnostic, which patch-mode
//! fine-tuning and attribution maps rely on.

pub mod arch;
pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod optim;
pub mod sampler;
pub mod scalar;

pub use arch::{Activation, ArchSpec, Layout, Padding};
pub use gradcheck::{check as gradient_check, GradCheck};
pub use model::{bce_with_logit, input_tensor, logistic, ModelParams, Network, Prediction, Tensor};
pub use optim::{Adam, LrSchedule, OptimizerKind, TrainConfig};
pub use sampler::{crop_offset, ClassSampler, Draw};
pub use scalar::Scalar;
