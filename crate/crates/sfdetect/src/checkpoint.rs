//! Checkpoint format: the magic `SFMODEL1`, a little-endian `u32` header
//! length, a UTF-8 JSON header, then every weight as little-endian `f32` in
//! layout order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sfdetect_core::dataset::DecoderId;
use sfdetect_core::dsp::RepKind;
use sfdetect_core::net::{ArchSpec, ModelParams};

use crate::dataset::write_atomic;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SFMODEL1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format_version: u32,
    pub arch: ArchSpec,
    pub representation: RepKind,
    pub trained_on: Vec<DecoderId>,
    pub rng_seed: u64,
    pub patch_size: Option<usize>,
    pub param_count: usize,
}

pub fn encode(params: &ModelParams) -> Result<Vec<u8>> {
    params.validate()?;
    let header = Header {
        format_version: FORMAT_VERSION,
        arch: params.arch.clone(),
        representation: params.representation,
        trained_on: params.trained_on.clone(),
        rng_seed: params.rng_seed,
        patch_size: params.patch_size,
        param_count: params.weights.len(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::json("serializing checkpoint header", e))?;
    let mut out = Vec::with_capacity(12 + json.len() + 4 * params.weights.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for w in &params.weights {
        out.extend_from_slice(&w.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<ModelParams> {
    let bad = |reason: String| Error::checkpoint(path, reason);
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(bad("missing SFMODEL1 magic".into()));
    }
    let len = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
    let body = &bytes[12..];
    if len > body.len() {
        return Err(bad(format!("header length {len} exceeds file size")));
    }
    let header: Header =
        serde_json::from_slice(&body[..len]).map_err(|e| bad(format!("unreadable header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(bad(format!("format version {} is not supported (expected {FORMAT_VERSION})", header.format_version)));
    }
    header.arch.validate().map_err(|e| bad(e.to_string()))?;
    let expected = header.arch.param_count();
    if header.param_count != expected {
        return Err(bad(format!("header declares {} weights, architecture has {expected}", header.param_count)));
    }
    let raw = &body[len..];
    if raw.len() != 4 * expected {
        return Err(bad(format!("{} weight bytes, expected {}", raw.len(), 4 * expected)));
    }
    let weights: Vec<f32> = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    let params = ModelParams {
        arch: header.arch,
        weights,
        rng_seed: header.rng_seed,
        trained_on: header.trained_on,
        representation: header.representation,
        patch_size: header.patch_size,
    };
    params.validate().map_err(|e| bad(e.to_string()))?;
    if params.arch.in_channels != params.representation.channels() {
        return Err(bad(format!("{} inputs do not match {} input channels", params.representation, params.arch.in_channels)));
    }
    Ok(params)
}

pub fn save(path: &Path, params: &ModelParams) -> Result<()> {
    write_atomic(path, &encode(params)?)
}

pub fn load(path: &Path) -> Result<ModelParams> {
    if !path.is_file() {
        return Err(Error::MissingArtifact(format!("checkpoint {}", path.display())));
    }
    decode(&fs::read(path).map_err(|e| Error::io(path, e))?, path)
}
