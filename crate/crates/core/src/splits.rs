//! Train/test partitions over manifest record indices.
//!
//! Every plan covers all records exactly once. Holdout schemes additionally
//! keep the held-out attribute value entirely on the test side.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusManifest, Dialect, Emotion, SpeakerGroup};
use crate::error::{Error, Result};
use crate::nn::{rng_for, Stream};

pub const DEFAULT_TEST_FRACTION: f64 = 0.10;

/// Seeds of the repeated random-split runs.
pub const RANDOM_SUITE_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

/// Held-out sentence sets, in table order.
pub const SENTENCE_SUITE: [[u32; 2]; 4] = [[6, 7], [4, 5], [2, 3], [1, 7]];

pub const DIALECT_SUITE: [Dialect; 4] = [Dialect::Gojjam, Dialect::Wollo, Dialect::Shewa, Dialect::Gonder];

pub const GROUP_SUITE: [SpeakerGroup; 3] = [
    SpeakerGroup::Professional,
    SpeakerGroup::SemiProfessional,
    SpeakerGroup::Amateur,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    Random90_10,
    SentenceIndependent,
    DialectIndependent,
    GroupIndependent,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::Random90_10,
        Scheme::SentenceIndependent,
        Scheme::DialectIndependent,
        Scheme::GroupIndependent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Random90_10 => "random",
            Scheme::SentenceIndependent => "sentence",
            Scheme::DialectIndependent => "dialect",
            Scheme::GroupIndependent => "group",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown split scheme '{s}' (random, sentence, dialect, group)")))
    }
}

/// A named partition of manifest indices. Id lists are sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub scheme: Scheme,
    /// Row label, `train | test`.
    pub label: String,
    pub params: BTreeMap<String, String>,
    pub seed: u64,
    pub manifest_checksum: String,
    pub train_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
}

impl SplitPlan {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks disjointness and coverage of `0..n`.
    pub fn check_partition(&self, n: usize) -> Result<()> {
        let train: BTreeSet<usize> = self.train_ids.iter().copied().collect();
        let test: BTreeSet<usize> = self.test_ids.iter().copied().collect();
        if train.len() != self.train_ids.len() || test.len() != self.test_ids.len() {
            return Err(Error::State(format!("plan '{}' repeats an id", self.label)));
        }
        if let Some(i) = train.intersection(&test).next() {
            return Err(Error::State(format!(
                "plan '{}' puts record {i} on both sides",
                self.label
            )));
        }
        if train.len() + test.len() != n || train.union(&test).any(|&i| i >= n) {
            return Err(Error::State(format!(
                "plan '{}' does not cover all {n} records",
                self.label
            )));
        }
        Ok(())
    }
}

fn plan(
    manifest: &CorpusManifest,
    scheme: Scheme,
    label: String,
    params: BTreeMap<String, String>,
    seed: u64,
    in_test: impl Fn(usize) -> bool,
) -> Result<SplitPlan> {
    let (test_ids, train_ids): (Vec<usize>, Vec<usize>) = (0..manifest.len()).partition(|&i| in_test(i));
    if test_ids.is_empty() || train_ids.is_empty() {
        return Err(Error::Config(format!("split '{label}' leaves one side empty")));
    }
    Ok(SplitPlan {
        scheme,
        label,
        params,
        seed,
        manifest_checksum: manifest.checksum(),
        train_ids,
        test_ids,
    })
}

/// Seeded shuffle and cut with `round(n * fraction)` test records.
///
/// With `stratified`, the cut is made per emotion so class proportions are
/// kept on both sides.
pub fn random_split(manifest: &CorpusManifest, test_fraction: f64, seed: u64, stratified: bool) -> Result<SplitPlan> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    if manifest.is_empty() {
        return Err(Error::Config("cannot split an empty manifest".into()));
    }
    let mut rng = rng_for(seed, Stream::Split);
    let mut test = vec![false; manifest.len()];
    let pools: Vec<Vec<usize>> = if stratified {
        Emotion::ALL
            .iter()
            .map(|&e| {
                (0..manifest.len())
                    .filter(|&i| manifest.records()[i].emotion == e)
                    .collect()
            })
            .collect()
    } else {
        vec![(0..manifest.len()).collect()]
    };
    for mut pool in pools {
        pool.shuffle(&mut rng);
        let k = (pool.len() as f64 * test_fraction).round() as usize;
        for &i in &pool[..k] {
            test[i] = true;
        }
    }
    let pct = (test_fraction * 100.0).round() as u32;
    let mut params = BTreeMap::new();
    params.insert("test_fraction".into(), test_fraction.to_string());
    params.insert("stratified".into(), stratified.to_string());
    plan(
        manifest,
        Scheme::Random90_10,
        format!("random {}/{pct} seed {seed}", 100 - pct),
        params,
        seed,
        |i| test[i],
    )
}

fn join_sorted<T: Ord + ToString>(items: impl IntoIterator<Item = T>) -> String {
    let set: BTreeSet<T> = items.into_iter().collect();
    set.iter().map(ToString::to_string).collect::<Vec<_>>().join("+")
}

/// Test side holds exactly the records whose sentence id is in `test_sentences`.
pub fn sentence_split(manifest: &CorpusManifest, test_sentences: &BTreeSet<u32>) -> Result<SplitPlan> {
    if test_sentences.is_empty() {
        return Err(Error::Config("no test sentences given".into()));
    }
    let present: BTreeSet<u32> = manifest.records().iter().map(|r| r.sentence_id).collect();
    let train: BTreeSet<u32> = present.difference(test_sentences).copied().collect();
    let label = format!(
        "{} | {}",
        join_sorted(train),
        join_sorted(test_sentences.iter().copied())
    );
    let mut params = BTreeMap::new();
    params.insert("test_sentences".into(), join_sorted(test_sentences.iter().copied()));
    plan(manifest, Scheme::SentenceIndependent, label, params, 0, |i| {
        test_sentences.contains(&manifest.records()[i].sentence_id)
    })
}

fn holdout<T: Copy + Eq + Ord + fmt::Display>(
    manifest: &CorpusManifest,
    scheme: Scheme,
    key: &str,
    value: T,
    attr: impl Fn(usize) -> Option<T>,
) -> Result<SplitPlan> {
    let mut values = BTreeSet::new();
    for i in 0..manifest.len() {
        let v = attr(i).ok_or_else(|| {
            Error::Metadata(format!(
                "record {} has no {key}; supply a speaker sidecar",
                manifest.records()[i].path
            ))
        })?;
        values.insert(v);
    }
    if !values.contains(&value) {
        return Err(Error::Metadata(format!("{key} {value} does not occur in the manifest")));
    }
    let label = format!(
        "{} | {value}",
        values
            .iter()
            .filter(|&&v| v != value)
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("+")
    );
    let mut params = BTreeMap::new();
    params.insert(format!("test_{key}"), value.to_string());
    plan(manifest, scheme, label, params, 0, |i| attr(i) == Some(value))
}

pub fn dialect_split(manifest: &CorpusManifest, test_dialect: Dialect) -> Result<SplitPlan> {
    holdout(manifest, Scheme::DialectIndependent, "dialect", test_dialect, |i| {
        manifest.records()[i].dialect
    })
}

pub fn group_split(manifest: &CorpusManifest, test_group: SpeakerGroup) -> Result<SplitPlan> {
    holdout(manifest, Scheme::GroupIndependent, "speaker_group", test_group, |i| {
        manifest.records()[i].speaker_group
    })
}

/// All plans of one scheme, in table row order.
pub fn scheme_suite(manifest: &CorpusManifest, scheme: Scheme) -> Result<Vec<SplitPlan>> {
    match scheme {
        Scheme::Random90_10 => RANDOM_SUITE_SEEDS
            .iter()
            .map(|&s| random_split(manifest, DEFAULT_TEST_FRACTION, s, false))
            .collect(),
        Scheme::SentenceIndependent => SENTENCE_SUITE
            .iter()
            .map(|s| sentence_split(manifest, &s.iter().copied().collect()))
            .collect(),
        Scheme::DialectIndependent => DIALECT_SUITE.iter().map(|&d| dialect_split(manifest, d)).collect(),
        Scheme::GroupIndependent => GROUP_SUITE.iter().map(|&g| group_split(manifest, g)).collect(),
    }
}
