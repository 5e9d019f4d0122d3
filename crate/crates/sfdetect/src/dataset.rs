//! Paired dataset on disk: `manifest.jsonl` plus
//! `<out_dir>/<family>-<variant>/<track_id>.wav` audio.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sfdetect_core::dataset::{assign_splits, DecoderFamily, DecoderId, Manifest, SplitFractions, TrackRecord, MAX_PAIR_MISMATCH_S};
use sfdetect_core::dsp::StftConfig;
use sfdetect_core::fakegen::GriffinMel;
use sfdetect_core::{rng, AudioClip, CANONICAL_RATE};

use crate::audio_io::{has_audio_extension, load_audio, read_wav, wav_info, write_wav};
use crate::error::{Error, Result};
use crate::transcoder::Transcoder;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
/// Minimum number of decodable real tracks for a dataset.
pub const MIN_REAL_TRACKS: usize = 10;

/// One JSON object per line, in manifest order.
pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let mut buf = Vec::new();
    for r in &manifest.records {
        serde_json::to_writer(&mut buf, r).map_err(|e| Error::json("serializing manifest", e))?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    if !path.is_file() {
        return Err(Error::MissingArtifact(format!("manifest {}", path.display())));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let r: TrackRecord =
            serde_json::from_str(line).map_err(|e| Error::json(format!("{} line {}", path.display(), i + 1), e))?;
        records.push(r);
    }
    Ok(Manifest::from_records(records)?)
}

/// Writes through a sibling temporary file so readers never see a torn file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Absolute location of a record's audio.
pub fn record_path(root: &Path, record: &TrackRecord) -> PathBuf {
    root.join(&record.path)
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub stft: StftConfig,
    pub griffin_lim_iters: usize,
    /// Root of the per-track render seeds.
    pub render_seed: u64,
    /// Decoder for compressed real inputs.
    pub transcoder: Option<Transcoder>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { stft: StftConfig::default(), griffin_lim_iters: 32, render_seed: 0, transcoder: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackFailure {
    pub track_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub tracks_found: usize,
    pub tracks_kept: usize,
    pub records: usize,
    pub placeholders: usize,
    pub failures: Vec<TrackFailure>,
}

/// Audio files directly under `dir` or in its subdirectories, sorted.
pub fn scan_audio(dir: &Path) -> Result<Vec<PathBuf>> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.is_dir() {
                walk(&path, out)?;
            } else if has_audio_extension(&path) {
                out.push(path);
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, &mut out)?;
    out.sort();
    Ok(out)
}

/// Track id of an input file: its stem. Ids must be unique and usable as
/// file names.
fn track_id(path: &Path) -> Result<String> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    if stem.is_empty() || stem.contains(':') {
        return Err(Error::Core(sfdetect_core::Error::Dataset(format!(
            "cannot derive a track id from {}",
            path.display()
        ))));
    }
    Ok(stem.to_string())
}

fn dataset_error(msg: String) -> Error {
    Error::Core(sfdetect_core::Error::Dataset(msg))
}

fn check_decoders(decoders: &[DecoderId]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for d in decoders {
        if d.is_real() {
            return Err(Error::Config("the real class is implicit; list only decoders".into()));
        }
        if d.family == DecoderFamily::Griffinmel && d.griffinmel_bands().is_none() {
            return Err(Error::Config(format!("griffinmel decoder '{d}' needs a band count")));
        }
        if !seen.insert(d) {
            return Err(Error::Config(format!("decoder '{d}' listed twice")));
        }
    }
    Ok(())
}

struct Rendered {
    id: String,
    duration_s: f64,
    fakes: Vec<(DecoderId, f64)>,
}

/// Seed of the GriffinMel render of one track.
pub fn render_seed(root: u64, decoder: &DecoderId, track_id: &str) -> u64 {
    rng::derive(root, &format!("render/{decoder}/{track_id}"), 0)
}

fn render_track(
    path: &Path,
    id: &str,
    out_dir: &Path,
    renderers: &[(DecoderId, GriffinMel)],
    opts: &BuildOptions,
) -> Result<Rendered> {
    let clip = load_audio(path, CANONICAL_RATE, opts.transcoder.as_ref())?;
    let real = DecoderId::real();
    write_wav(&out_dir.join(TrackRecord::layout_path(&real, id)), &clip)?;
    let mut fakes = Vec::with_capacity(renderers.len());
    for (decoder, gm) in renderers {
        let fake = gm.reconstruct(&clip, render_seed(opts.render_seed, decoder, id))?;
        write_wav(&out_dir.join(TrackRecord::layout_path(decoder, id)), &fake)?;
        fakes.push((decoder.clone(), fake.duration_s()));
    }
    Ok(Rendered { id: id.to_string(), duration_s: clip.duration_s(), fakes })
}

/// Decodes every real track, renders the in-process decoders, adds
/// placeholders for external ones, assigns splits per source track and
/// writes `manifest.jsonl`. A track whose decode or render fails is dropped
/// with all of its records. Tracks render in parallel; the manifest is
/// assembled in a deterministic order afterwards.
pub fn build_manifest(
    real_dir: &Path,
    out_dir: &Path,
    decoders: &[DecoderId],
    split_seed: u64,
    fractions: SplitFractions,
    opts: &BuildOptions,
) -> Result<(Manifest, BuildReport)> {
    check_decoders(decoders)?;
    fractions.validate()?;
    if !real_dir.is_dir() {
        return Err(Error::MissingArtifact(format!("real audio directory {}", real_dir.display())));
    }
    let files = scan_audio(real_dir)?;
    if files.is_empty() {
        return Err(dataset_error(format!("{} holds no audio files", real_dir.display())));
    }
    let mut ids = BTreeMap::new();
    for f in &files {
        let id = track_id(f)?;
        if let Some(prev) = ids.insert(id.clone(), f.clone()) {
            return Err(dataset_error(format!("{} and {} share track id '{id}'", prev.display(), f.display())));
        }
    }
    for d in decoders.iter().map(|d| d.name()).chain(["real".to_string()]) {
        let dir = out_dir.join(d);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let renderers: Vec<(DecoderId, GriffinMel)> = decoders
        .iter()
        .filter_map(|d| d.griffinmel_bands().map(|n| (d.clone(), n)))
        .map(|(d, n)| Ok((d, GriffinMel::new(n, opts.stft, opts.griffin_lim_iters, CANONICAL_RATE)?)))
        .collect::<Result<_>>()?;

    let outcomes: Vec<(String, Result<Rendered>)> = ids
        .par_iter()
        .map(|(id, path)| (id.clone(), render_track(path, id, out_dir, &renderers, opts)))
        .collect();
    let mut kept = Vec::new();
    let mut failures = Vec::new();
    for (id, outcome) in outcomes {
        match outcome {
            Ok(r) => kept.push(r),
            Err(e) => {
                log::warn!("dropping track '{id}': {e}");
                for d in std::iter::once(DecoderId::real()).chain(decoders.iter().cloned()) {
                    let _ = fs::remove_file(out_dir.join(TrackRecord::layout_path(&d, &id)));
                }
                failures.push(TrackFailure { track_id: id, reason: e.to_string() });
            }
        }
    }
    if kept.len() < MIN_REAL_TRACKS {
        return Err(dataset_error(format!(
            "{} decodable tracks in {}, at least {MIN_REAL_TRACKS} required",
            kept.len(),
            real_dir.display()
        )));
    }

    let splits = assign_splits(kept.iter().map(|r| r.id.as_str()), split_seed, fractions)?;
    let mut records = Vec::new();
    for r in &kept {
        let split = splits[&r.id];
        records.push(TrackRecord {
            track_id: r.id.clone(),
            decoder: DecoderId::real(),
            path: TrackRecord::layout_path(&DecoderId::real(), &r.id),
            split,
            sample_rate: CANONICAL_RATE,
            duration_s: r.duration_s,
            source_track_id: r.id.clone(),
        });
        for d in decoders {
            let rendered = r.fakes.iter().find(|(fd, _)| fd == d);
            records.push(TrackRecord {
                track_id: TrackRecord::fake_id(&r.id, d),
                decoder: d.clone(),
                path: rendered.map(|_| TrackRecord::layout_path(d, &r.id)).unwrap_or_default(),
                split,
                sample_rate: CANONICAL_RATE,
                duration_s: rendered.map_or(0.0, |(_, s)| *s),
                source_track_id: r.id.clone(),
            });
        }
    }
    let mut manifest = Manifest::from_records(records)?;
    manifest.decoders = decoders.to_vec();
    manifest.sort();
    manifest.check_split_fractions(fractions)?;
    write_manifest(&out_dir.join(MANIFEST_FILE), &manifest)?;
    let placeholders = manifest.records.iter().filter(|r| r.is_placeholder()).count();
    let report = BuildReport {
        tracks_found: files.len(),
        tracks_kept: kept.len(),
        records: manifest.records.len(),
        placeholders,
        failures,
    };
    Ok((manifest, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub file: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub decoder: DecoderId,
    pub resolved: Vec<String>,
    pub rejections: Vec<Rejection>,
    /// Real tracks for which no file was supplied.
    pub missing: Vec<String>,
}

fn same_dir(a: &Path, b: &Path) -> bool {
    matches!((a.canonicalize(), b.canonicalize()), (Ok(x), Ok(y)) if x == y)
}

fn check_external(path: &Path, source: &TrackRecord) -> std::result::Result<f64, String> {
    let info = wav_info(path).map_err(|e| e.to_string())?;
    if info.sample_rate != CANONICAL_RATE {
        return Err(format!("stored at {} Hz, expected {CANONICAL_RATE}", info.sample_rate));
    }
    let duration = info.duration_s();
    if (duration - source.duration_s).abs() > MAX_PAIR_MISMATCH_S {
        return Err(format!("lasts {duration:.3} s, source {:.3} s", source.duration_s));
    }
    read_wav(path).map_err(|e| e.to_string())?;
    Ok(duration)
}

/// Resolves the `decoder` records of `manifest` from `fake_dir/<track_id>.wav`
/// files produced outside the toolkit. Accepted files are copied into the
/// dataset layout under `root` (unless `fake_dir` already is that
/// directory). Files without a real source, at another rate, or whose
/// duration differs from the source by more than 0.1 s are rejected.
pub fn ingest_external(manifest: &Manifest, root: &Path, decoder: &DecoderId, fake_dir: &Path) -> Result<(Manifest, IngestReport)> {
    if decoder.is_real() {
        return Err(Error::Config("cannot ingest files as the real class".into()));
    }
    if !fake_dir.is_dir() {
        return Err(Error::MissingArtifact(format!("fake directory {}", fake_dir.display())));
    }
    let target_dir = root.join(decoder.name());
    let in_place = same_dir(fake_dir, &target_dir);
    fs::create_dir_all(&target_dir).map_err(|e| Error::io(&target_dir, e))?;

    let mut records = manifest.records.clone();
    let mut resolved = Vec::new();
    let mut rejections = Vec::new();
    let mut files: Vec<PathBuf> = fs::read_dir(fake_dir)
        .map_err(|e| Error::io(fake_dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| Error::io(fake_dir, e)))
        .collect::<Result<_>>()?;
    files.sort();
    for path in files.into_iter().filter(|p| p.is_file()) {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let reject = |reason: String| Rejection { file: name.clone(), reason };
        if path.extension().and_then(|e| e.to_str()) != Some("wav") {
            if has_audio_extension(&path) {
                rejections.push(reject("not a .wav file".into()));
            }
            continue;
        }
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let Some(source) = manifest.get(&id).filter(|r| r.decoder.is_real()) else {
            rejections.push(reject(format!("orphan: no real track '{id}' in the manifest")));
            continue;
        };
        let duration = match check_external(&path, source) {
            Ok(d) => d,
            Err(reason) => {
                rejections.push(reject(reason));
                continue;
            }
        };
        let rel = TrackRecord::layout_path(decoder, &id);
        if !in_place {
            let dest = root.join(&rel);
            fs::copy(&path, &dest).map_err(|e| Error::io(&dest, e))?;
        }
        let fake_id = TrackRecord::fake_id(&id, decoder);
        let record = TrackRecord {
            track_id: fake_id.clone(),
            decoder: decoder.clone(),
            path: rel,
            split: source.split,
            sample_rate: CANONICAL_RATE,
            duration_s: duration,
            source_track_id: id.clone(),
        };
        match records.iter_mut().find(|r| r.track_id == fake_id) {
            Some(slot) => *slot = record,
            None => records.push(record),
        }
        resolved.push(id);
    }
    let done: BTreeSet<&str> = resolved.iter().map(String::as_str).collect();
    let missing = manifest
        .records
        .iter()
        .filter(|r| r.decoder.is_real() && !done.contains(r.track_id.as_str()))
        .map(|r| r.track_id.clone())
        .collect();
    let mut decoders = manifest.decoders.clone();
    if !decoders.contains(decoder) {
        decoders.push(decoder.clone());
    }
    let mut updated = Manifest::from_records(records)?;
    updated.decoders = decoders;
    updated.sort();
    Ok((updated, IngestReport { decoder: decoder.clone(), resolved, rejections, missing }))
}

/// Loads the audio of a manifest record.
pub fn load_record(root: &Path, record: &TrackRecord) -> Result<AudioClip> {
    if record.is_placeholder() {
        return Err(Error::MissingArtifact(format!("'{}' has not been ingested", record.track_id)));
    }
    let path = record_path(root, record);
    if !path.is_file() {
        return Err(Error::MissingArtifact(format!("audio of '{}' at {}", record.track_id, path.display())));
    }
    load_audio(&path, CANONICAL_RATE, None)
}
