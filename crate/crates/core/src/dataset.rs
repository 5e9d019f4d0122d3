//! Catalogue of the paired real/fake dataset.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::audio::CANONICAL_RATE;
use crate::error::{bail, Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderFamily {
    Real,
    Griffinmel,
    Encodec,
    Dac,
    Musika,
    Other,
}

impl DecoderFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            DecoderFamily::Real => "real",
            DecoderFamily::Griffinmel => "griffinmel",
            DecoderFamily::Encodec => "encodec",
            DecoderFamily::Dac => "dac",
            DecoderFamily::Musika => "musika",
            DecoderFamily::Other => "other",
        }
    }
}

/// Which pipeline produced a track. `(real, "")` is the only real label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DecoderId {
    pub family: DecoderFamily,
    pub variant: String,
}

impl DecoderId {
    pub fn real() -> Self {
        Self { family: DecoderFamily::Real, variant: String::new() }
    }

    pub fn new(family: DecoderFamily, variant: &str) -> Self {
        Self { family, variant: String::from(variant) }
    }

    pub fn griffinmel(n_mels: usize) -> Self {
        Self { family: DecoderFamily::Griffinmel, variant: format!("{n_mels}") }
    }

    pub fn is_real(&self) -> bool {
        self.family == DecoderFamily::Real
    }

    /// Training label: 1 for fakes.
    pub fn label(&self) -> u8 {
        u8::from(!self.is_real())
    }

    /// Mel band count of a GriffinMel decoder.
    pub fn griffinmel_bands(&self) -> Option<usize> {
        (self.family == DecoderFamily::Griffinmel).then(|| self.variant.parse().ok()).flatten()
    }

    /// Canonical name, also the directory the decoder's audio lives in:
    /// `real`, `griffinmel-512`, `encodec-24kbps`, `musika`.
    pub fn name(&self) -> String {
        if self.variant.is_empty() {
            String::from(self.family.as_str())
        } else {
            format!("{}-{}", self.family.as_str(), self.variant)
        }
    }

    /// The nine reconstructions: Encodec at 3/6/24 kbit/s, DAC at 2/7/14
    /// kbit/s, GriffinMel with 256 and 512 bands, and Musika.
    pub fn standard_roster() -> Vec<DecoderId> {
        let mut v = Vec::new();
        for b in ["3kbps", "6kbps", "24kbps"] {
            v.push(DecoderId::new(DecoderFamily::Encodec, b));
        }
        for b in ["2kbps", "7kbps", "14kbps"] {
            v.push(DecoderId::new(DecoderFamily::Dac, b));
        }
        v.push(DecoderId::griffinmel(256));
        v.push(DecoderId::griffinmel(512));
        v.push(DecoderId::new(DecoderFamily::Musika, ""));
        v
    }
}

impl fmt::Display for DecoderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for DecoderId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (family, variant) = match s.split_once('-') {
            Some((f, v)) => (f, v),
            None => (s, ""),
        };
        let family = match family {
            "real" => DecoderFamily::Real,
            "griffinmel" => DecoderFamily::Griffinmel,
            "encodec" => DecoderFamily::Encodec,
            "dac" => DecoderFamily::Dac,
            "musika" => DecoderFamily::Musika,
            "other" => DecoderFamily::Other,
            _ => bail!(Argument, "unknown decoder family in '{s}'"),
        };
        if family == DecoderFamily::Real && !variant.is_empty() {
            bail!(Argument, "the real class has no variant, got '{s}'");
        }
        if family == DecoderFamily::Griffinmel && variant.parse::<usize>().map_or(true, |n| n == 0) {
            bail!(Argument, "griffinmel variant must be a band count, got '{s}'");
        }
        Ok(DecoderId { family, variant: String::from(variant) })
    }
}

pub fn parse_decoders(list: &str) -> Result<Vec<DecoderId>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            _ => bail!(Argument, "unknown split '{s}'"),
        }
    }
}

/// Train/validation/test proportions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self { train: 0.7, valid: 0.1, test: 0.2 }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.valid, self.test];
        if all.iter().any(|f| !(0.0..=1.0).contains(f)) || ((all.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            bail!(Argument, "split fractions must be in [0, 1] and sum to 1, got {all:?}");
        }
        Ok(())
    }

    pub fn quotas(&self, n: usize) -> (usize, usize, usize) {
        let train = ((self.train * n as f64).round() as usize).min(n);
        let valid = ((self.valid * n as f64).round() as usize).min(n - train);
        (train, valid, n - train - valid)
    }
}

/// Assigns splits per source track: tracks are ranked by a seeded hash of
/// their id and the ranking is cut at the split quotas. A track's split
/// depends only on its id, the seed and the set of tracks, never on the
/// input order.
pub fn assign_splits<'a, I>(source_ids: I, seed: u64, fractions: SplitFractions) -> Result<BTreeMap<String, Split>>
where
    I: IntoIterator<Item = &'a str>,
{
    fractions.validate()?;
    let unique: BTreeSet<&str> = source_ids.into_iter().collect();
    let mut ranked: Vec<(u64, &str)> = unique.into_iter().map(|id| (rng::derive(seed, id, 0), id)).collect();
    ranked.sort_unstable();
    let (train, valid, _) = fractions.quotas(ranked.len());
    Ok(ranked
        .into_iter()
        .enumerate()
        .map(|(i, (_, id))| {
            let split = if i < train {
                Split::Train
            } else if i < train + valid {
                Split::Valid
            } else {
                Split::Test
            };
            (String::from(id), split)
        })
        .collect())
}

/// Maximum duration difference between a reconstruction and its source.
pub const MAX_PAIR_MISMATCH_S: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub track_id: String,
    pub decoder: DecoderId,
    /// Audio location relative to the manifest directory. Empty for codec
    /// placeholders that have not been ingested yet.
    pub path: String,
    pub split: Split,
    pub sample_rate: u32,
    pub duration_s: f64,
    pub source_track_id: String,
}

impl TrackRecord {
    pub fn is_placeholder(&self) -> bool {
        self.path.is_empty()
    }

    /// Id of the reconstruction of `source` by `decoder`.
    pub fn fake_id(source: &str, decoder: &DecoderId) -> String {
        format!("{}:{}", decoder.name(), source)
    }

    /// Relative audio path for a track of `decoder`.
    pub fn layout_path(decoder: &DecoderId, source: &str) -> String {
        format!("{}/{}.wav", decoder.name(), source)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub records: Vec<TrackRecord>,
    pub decoders: Vec<DecoderId>,
    pub canonical_rate: u32,
}

impl Manifest {
    /// Rebuilds the decoder list from the records (first appearance order,
    /// real excluded) and checks every invariant.
    pub fn from_records(records: Vec<TrackRecord>) -> Result<Self> {
        let mut decoders: Vec<DecoderId> = Vec::new();
        for r in &records {
            if !r.decoder.is_real() && !decoders.contains(&r.decoder) {
                decoders.push(r.decoder.clone());
            }
        }
        let m = Self { records, decoders, canonical_rate: CANONICAL_RATE };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        let mut reals: BTreeMap<&str, &TrackRecord> = BTreeMap::new();
        for r in &self.records {
            if !ids.insert(r.track_id.as_str()) {
                bail!(Dataset, "duplicate track id '{}'", r.track_id);
            }
            if r.decoder.is_real() {
                if r.track_id != r.source_track_id {
                    bail!(Dataset, "real track '{}' must be its own source", r.track_id);
                }
                reals.insert(r.track_id.as_str(), r);
            }
            if !r.is_placeholder() && r.sample_rate != self.canonical_rate {
                bail!(Dataset, "track '{}' stored at {} Hz, expected {}", r.track_id, r.sample_rate, self.canonical_rate);
            }
        }
        let mut pairs = BTreeSet::new();
        for r in self.records.iter().filter(|r| !r.decoder.is_real()) {
            let Some(src) = reals.get(r.source_track_id.as_str()) else {
                bail!(Dataset, "fake '{}' has no real source '{}'", r.track_id, r.source_track_id);
            };
            if src.split != r.split {
                bail!(Dataset, "fake '{}' split {:?} differs from its source's {:?}", r.track_id, r.split, src.split);
            }
            if !r.is_placeholder() && (r.duration_s - src.duration_s).abs() > MAX_PAIR_MISMATCH_S {
                bail!(Dataset, "fake '{}' lasts {:.3} s, source {:.3} s", r.track_id, r.duration_s, src.duration_s);
            }
            if !pairs.insert((r.source_track_id.as_str(), &r.decoder)) {
                bail!(Dataset, "two '{}' reconstructions of '{}'", r.decoder, r.source_track_id);
            }
        }
        Ok(())
    }

    /// Real-track split counts must sit within 2 % (or one track) of the
    /// requested fractions.
    pub fn check_split_fractions(&self, fractions: SplitFractions) -> Result<()> {
        let reals: Vec<&TrackRecord> = self.records.iter().filter(|r| r.decoder.is_real()).collect();
        let n = reals.len();
        if n == 0 {
            return Ok(());
        }
        let count = |s: Split| reals.iter().filter(|r| r.split == s).count();
        for (split, target) in [(Split::Train, fractions.train), (Split::Valid, fractions.valid), (Split::Test, fractions.test)] {
            let got = count(split) as f64;
            let diff = (got - target * n as f64).abs();
            if diff > (0.02 * n as f64).max(1.0) {
                bail!(Dataset, "{} split holds {got} of {n} real tracks, expected {:.1}", split.as_str(), target * n as f64);
            }
        }
        Ok(())
    }

    pub fn records_for<'a>(&'a self, decoder: &'a DecoderId, split: Split) -> impl Iterator<Item = &'a TrackRecord> + 'a {
        self.records.iter().filter(move |r| &r.decoder == decoder && r.split == split && !r.is_placeholder())
    }

    pub fn reals(&self, split: Split) -> impl Iterator<Item = &TrackRecord> + '_ {
        self.records.iter().filter(move |r| r.decoder.is_real() && r.split == split)
    }

    pub fn fake_of(&self, source: &str, decoder: &DecoderId) -> Option<&TrackRecord> {
        self.records
            .iter()
            .find(|r| &r.decoder == decoder && r.source_track_id == source && !r.is_placeholder())
    }

    pub fn get(&self, track_id: &str) -> Option<&TrackRecord> {
        self.records.iter().find(|r| r.track_id == track_id)
    }

    /// Records reordered canonically: by source, real first, then decoders
    /// in manifest order.
    pub fn sort(&mut self) {
        let order: BTreeMap<DecoderId, usize> =
            self.decoders.iter().enumerate().map(|(i, d)| (d.clone(), i + 1)).collect();
        self.records.sort_by(|a, b| {
            let rank = |r: &TrackRecord| if r.decoder.is_real() { 0 } else { order.get(&r.decoder).copied().unwrap_or(usize::MAX) };
            a.source_track_id.cmp(&b.source_track_id).then(rank(a).cmp(&rank(b)))
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn real(id: &str, split: Split) -> TrackRecord {
        TrackRecord {
            track_id: id.into(),
            decoder: DecoderId::real(),
            path: format!("real/{id}.wav"),
            split,
            sample_rate: CANONICAL_RATE,
            duration_s: 3.0,
            source_track_id: id.into(),
        }
    }

    fn fake(id: &str, split: Split, d: &DecoderId) -> TrackRecord {
        TrackRecord {
            track_id: TrackRecord::fake_id(id, d),
            decoder: d.clone(),
            path: TrackRecord::layout_path(d, id),
            split,
            sample_rate: CANONICAL_RATE,
            duration_s: 3.05,
            source_track_id: id.into(),
        }
    }

    #[test]
    fn decoder_names_parse_back() {
        for d in DecoderId::standard_roster().into_iter().chain([DecoderId::real()]) {
            assert_eq!(d.name().parse::<DecoderId>().unwrap(), d);
        }
        assert_eq!(DecoderId::standard_roster().len(), 9);
        assert!("griffinmel-abc".parse::<DecoderId>().is_err());
        assert!("real-x".parse::<DecoderId>().is_err());
        assert!("wavenet-1".parse::<DecoderId>().is_err());
        assert_eq!(DecoderId::griffinmel(512).griffinmel_bands(), Some(512));
    }

    #[test]
    fn split_quotas_are_exact_for_any_seed() {
        let ids: Vec<String> = (0..100).map(|i| format!("t{i:03}")).collect();
        for seed in 0..25 {
            let s = assign_splits(ids.iter().map(String::as_str), seed, SplitFractions::default()).unwrap();
            let count = |x| s.values().filter(|&&v| v == x).count();
            assert_eq!((count(Split::Train), count(Split::Valid), count(Split::Test)), (70, 10, 20));
        }
    }

    #[test]
    fn splits_ignore_input_order() {
        let mut ids: Vec<String> = (0..40).map(|i| format!("x{i}")).collect();
        let a = assign_splits(ids.iter().map(String::as_str), 3, SplitFractions::default()).unwrap();
        ids.reverse();
        let b = assign_splits(ids.iter().map(String::as_str), 3, SplitFractions::default()).unwrap();
        assert_eq!(a, b);
        let c = assign_splits(ids.iter().map(String::as_str), 4, SplitFractions::default()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn bad_fractions_rejected() {
        let f = SplitFractions { train: 0.8, valid: 0.1, test: 0.2 };
        assert!(assign_splits(["a"], 0, f).is_err());
    }

    #[test]
    fn manifest_invariants() {
        let d = DecoderId::griffinmel(512);
        let ok = vec![real("a", Split::Train), fake("a", Split::Train, &d)];
        let m = Manifest::from_records(ok).unwrap();
        assert_eq!(m.decoders, vec![d.clone()]);

        let leak = vec![real("a", Split::Train), fake("a", Split::Test, &d)];
        assert!(Manifest::from_records(leak).is_err());

        let orphan = vec![real("a", Split::Train), fake("b", Split::Train, &d)];
        assert!(Manifest::from_records(orphan).is_err());

        let mut long = fake("a", Split::Train, &d);
        long.duration_s = 3.5;
        assert!(Manifest::from_records(vec![real("a", Split::Train), long]).is_err());

        let mut rate = fake("a", Split::Train, &d);
        rate.sample_rate = 48000;
        assert!(Manifest::from_records(vec![real("a", Split::Train), rate]).is_err());
    }
}
