//! Core algorithms for music deepfake forensics.
//!
//! Everything in this crate is pure computation over in-memory buffers:
//! spectral front-ends and Griffin-Lim phase retrieval, the GriffinMel
//! reconstruction pipeline, the audio manipulations used for robustness
//! probes, the compact convolutional detector with exact backpropagation,
//! and the evaluation metrics (accuracy tables, calibration, mixing curves,
//! attribution maps).
//!
//! The crate is `no_std` + `alloc`. The default `std` feature only enables
//! the standard-library backends of its dependencies (runtime SIMD dispatch
//! for the matrix kernels, `std::error::Error` impls).

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod audio;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod fakegen;
pub mod fft;
pub mod manipulate;
pub mod net;
pub mod rng;
pub mod vocoder;

pub use audio::{AudioClip, CANONICAL_RATE};
pub use error::{Error, Result};
