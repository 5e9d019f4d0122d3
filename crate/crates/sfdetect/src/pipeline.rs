//! Track → excerpt → detector input, shared by training and every protocol.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sfdetect_core::dataset::TrackRecord;
use sfdetect_core::dsp::{to_representation, RepKind, StftConfig};
use sfdetect_core::net::{input_tensor, ModelParams, Tensor};
use sfdetect_core::AudioClip;

use crate::dataset::load_record;
use crate::error::Result;

/// Mono mix coefficient used outside training.
pub const EVAL_MONO_ALPHA: f64 = 0.5;
pub const DEFAULT_CUTOFF_HZ: f64 = 16_000.0;
pub const DEFAULT_EXCERPT_S: f64 = 0.8;

/// Representation extraction settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontEnd {
    pub kind: RepKind,
    pub stft: StftConfig,
    pub cutoff_hz: f64,
}

impl FrontEnd {
    pub fn new(kind: RepKind) -> Self {
        Self { kind, stft: StftConfig::default(), cutoff_hz: DEFAULT_CUTOFF_HZ }
    }

    /// Front end matching a model's input representation.
    pub fn for_model(params: &ModelParams, stft: StftConfig, cutoff_hz: f64) -> Self {
        Self { kind: params.representation, stft, cutoff_hz }
    }

    /// Seeded excerpt, mixed to mono with `alpha` and peak-normalized.
    pub fn excerpt(&self, clip: &AudioClip, length_s: f64, seed: u64, alpha: f64) -> Result<AudioClip> {
        Ok(clip.random_excerpt(length_s, seed)?.to_mono(alpha)?.peak_normalize())
    }

    /// Network input of a mono excerpt.
    pub fn tensor(&self, mono: &AudioClip) -> Result<Tensor<f32>> {
        Ok(input_tensor(&to_representation(mono, self.kind, self.stft, self.cutoff_hz)?))
    }

    /// Shortest excerpt whose representation is at least `columns` wide.
    pub fn excerpt_s_for_columns(&self, columns: usize, sample_rate: u32) -> f64 {
        let samples = match self.kind {
            RepKind::Waveform => columns,
            _ if self.stft.center_pad => columns.saturating_sub(1) * self.stft.hop,
            _ => self.stft.n_fft + columns.saturating_sub(1) * self.stft.hop,
        };
        // One extra sample absorbs rounding in `frames_for`.
        (samples + 1) as f64 / f64::from(sample_rate)
    }
}

/// `p_fake` of a mono excerpt.
pub fn predict_clip(params: &ModelParams, front: &FrontEnd, mono: &AudioClip) -> Result<f64> {
    Ok(params.predict_tensor(&front.tensor(mono)?)?.p_fake)
}

/// Decoded manifest audio, optionally memoized by track id.
#[derive(Debug)]
pub struct ClipStore {
    root: PathBuf,
    cache: Option<Mutex<HashMap<String, Arc<AudioClip>>>>,
}

impl ClipStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into(), cache: Some(Mutex::new(HashMap::new())) }
    }

    /// A store that decodes on every access.
    pub fn uncached(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into(), cache: None }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn get(&self, record: &TrackRecord) -> Result<Arc<AudioClip>> {
        let Some(cache) = &self.cache else {
            return Ok(Arc::new(load_record(&self.root, record)?));
        };
        if let Some(c) = cache.lock().expect("clip cache poisoned").get(&record.track_id) {
            return Ok(Arc::clone(c));
        }
        let clip = Arc::new(load_record(&self.root, record)?);
        cache.lock().expect("clip cache poisoned").insert(record.track_id.clone(), Arc::clone(&clip));
        Ok(clip)
    }
}
