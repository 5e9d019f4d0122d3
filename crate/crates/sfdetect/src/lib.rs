//! Std companion of `sfdetect-core`: audio file I/O, the external
//! transcoder, dataset and checkpoint formats, training and evaluation
//! drivers, report writers and the command line.

pub mod audio_io;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod pipeline;
pub mod protocols;
pub mod report;
pub mod synth;
pub mod train;
pub mod transcoder;

pub use error::{Error, Result};
pub use sfdetect_core as core;
