//! Corpus manifests for ASED, RAVDESS and EMO-DB over a shared five-emotion
//! label space.
//!
//! ASED filenames look like `a5-02-01-12.wav`: emotion code, sentence
//! (01-07), repetition (01-02) and speaker (01-65). Dialect and speaker group
//! are not in the filename; they come from a sidecar CSV keyed by speaker.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Emotion {
    Neutral,
    Fearful,
    Happy,
    Sad,
    Angry,
}

impl Emotion {
    pub const ALL: [Emotion; 5] = [
        Emotion::Neutral,
        Emotion::Fearful,
        Emotion::Happy,
        Emotion::Sad,
        Emotion::Angry,
    ];

    /// Class index used as the model label.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Neutral => "neutral",
            Emotion::Fearful => "fearful",
            Emotion::Happy => "happy",
            Emotion::Sad => "sad",
            Emotion::Angry => "angry",
        }
    }

    /// Two-character ASED filename code.
    pub fn ased_code(self) -> &'static str {
        match self {
            Emotion::Neutral => "n1",
            Emotion::Fearful => "f2",
            Emotion::Happy => "h3",
            Emotion::Sad => "s4",
            Emotion::Angry => "a5",
        }
    }

    pub fn from_ased_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.ased_code() == code)
    }

    pub fn names() -> [&'static str; 5] {
        Self::ALL.map(Emotion::name)
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|e| e.name() == lower)
            .ok_or_else(|| Error::Config(format!("unknown emotion '{s}'")))
    }
}

macro_rules! named_enum {
    ($name:ident { $($variant:ident => $text:literal $(| $alias:literal)*),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                let norm: String = s.trim().to_ascii_lowercase().chars().filter(|c| c.is_ascii_alphanumeric()).collect();
                $(
                    if norm == $text.to_ascii_lowercase().replace(|c: char| !c.is_ascii_alphanumeric(), "")
                        $(|| norm == $alias)*
                    {
                        return Ok($name::$variant);
                    }
                )+
                Err(Error::Metadata(format!("unknown {} '{s}'", stringify!($name))))
            }
        }
    };
}

named_enum!(CorpusKind {
    Ased => "ASED",
    Ravdess => "RAVDESS",
    EmoDb => "EMODB" | "emodb" | "berlin",
});

named_enum!(Dialect {
    Gojjam => "Gojjam",
    Wollo => "Wollo",
    Shewa => "Shewa",
    Gonder => "Gonder" | "gondar",
});

named_enum!(SpeakerGroup {
    Professional => "Professional" | "pro",
    SemiProfessional => "Semi-professional" | "semipro",
    Amateur => "Amateur",
});

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipRecord {
    /// Path relative to the manifest root, `/`-separated.
    pub path: String,
    pub corpus: CorpusKind,
    pub emotion: Emotion,
    pub sentence_id: u32,
    pub repetition: u32,
    pub speaker_id: String,
    pub dialect: Option<Dialect>,
    pub speaker_group: Option<SpeakerGroup>,
}

impl ClipRecord {
    fn bare(
        path: &str,
        corpus: CorpusKind,
        emotion: Emotion,
        sentence_id: u32,
        repetition: u32,
        speaker_id: String,
    ) -> Self {
        Self {
            path: path.to_string(),
            corpus,
            emotion,
            sentence_id,
            repetition,
            speaker_id,
            dialect: None,
            speaker_group: None,
        }
    }

    /// Label of this clip for a five-class model.
    pub fn label(&self) -> usize {
        self.emotion.index()
    }
}

/// Fields of an ASED filename.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AsedName {
    pub emotion: Emotion,
    pub sentence_id: u32,
    pub repetition: u32,
    pub speaker: u32,
}

fn basename(name: &str) -> &str {
    name.rsplit(['/', '\\']).next().unwrap_or(name)
}

fn numeric_field(file: &str, field: &str, what: &str, range: std::ops::RangeInclusive<u32>) -> Result<u32> {
    if field.len() != 2 || !field.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::manifest(
            file,
            format!("{what} field '{field}' is not two digits"),
        ));
    }
    let v: u32 = field.parse().expect("two ASCII digits");
    if !range.contains(&v) {
        return Err(Error::manifest(
            file,
            format!("{what} {v} outside {}..={}", range.start(), range.end()),
        ));
    }
    Ok(v)
}

/// Parses `<code>-<NN>-<NN>-<NN>.wav`.
pub fn parse_ased_name(filename: &str) -> Result<AsedName> {
    let base = basename(filename);
    let stem = base
        .strip_suffix(".wav")
        .or_else(|| base.strip_suffix(".WAV"))
        .ok_or_else(|| Error::manifest(filename, "not a .wav file"))?;
    let parts: Vec<&str> = stem.split('-').collect();
    let [code, sentence, rep, speaker] = parts[..] else {
        return Err(Error::manifest(
            filename,
            "expected <code>-<sentence>-<repetition>-<speaker>.wav",
        ));
    };
    let emotion = Emotion::from_ased_code(code)
        .ok_or_else(|| Error::manifest(filename, format!("unknown emotion code '{code}'")))?;
    Ok(AsedName {
        emotion,
        sentence_id: numeric_field(filename, sentence, "sentence", 1..=7)?,
        repetition: numeric_field(filename, rep, "repetition", 1..=2)?,
        speaker: numeric_field(filename, speaker, "speaker", 1..=65)?,
    })
}

/// Inverse of [`parse_ased_name`].
pub fn format_ased_name(name: &AsedName) -> String {
    format!(
        "{}-{:02}-{:02}-{:02}.wav",
        name.emotion.ased_code(),
        name.sentence_id,
        name.repetition,
        name.speaker
    )
}

fn ased_record(path: &str) -> Result<ClipRecord> {
    let n = parse_ased_name(path)?;
    Ok(ClipRecord::bare(
        path,
        CorpusKind::Ased,
        n.emotion,
        n.sentence_id,
        n.repetition,
        format!("{:02}", n.speaker),
    ))
}

/// Parses a RAVDESS name such as `03-01-06-01-02-01-12.wav`.
///
/// Returns `Ok(None)` for clips outside the five-emotion space or outside
/// the audio-only speech subset.
pub fn parse_ravdess_name(filename: &str) -> Result<Option<ClipRecord>> {
    let base = basename(filename);
    let stem = base
        .strip_suffix(".wav")
        .ok_or_else(|| Error::manifest(filename, "not a .wav file"))?;
    let fields: Vec<&str> = stem.split('-').collect();
    if fields.len() != 7
        || fields
            .iter()
            .any(|f| f.len() != 2 || !f.bytes().all(|b| b.is_ascii_digit()))
    {
        return Err(Error::manifest(filename, "expected seven two-digit fields"));
    }
    let v: Vec<u32> = fields.iter().map(|f| f.parse().expect("digits")).collect();
    let (modality, channel, emotion, intensity, statement, repetition, actor) =
        (v[0], v[1], v[2], v[3], v[4], v[5], v[6]);
    let check = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(Error::manifest(filename, format!("invalid {what}")))
        }
    };
    check((1..=3).contains(&modality), "modality")?;
    check((1..=2).contains(&channel), "vocal channel")?;
    check((1..=8).contains(&emotion), "emotion")?;
    check((1..=2).contains(&intensity), "intensity")?;
    check((1..=2).contains(&statement), "statement")?;
    check((1..=2).contains(&repetition), "repetition")?;
    check((1..=24).contains(&actor), "actor")?;
    if modality != 3 || channel != 1 {
        return Ok(None);
    }
    let emotion = match emotion {
        1 => Emotion::Neutral,
        3 => Emotion::Happy,
        4 => Emotion::Sad,
        5 => Emotion::Angry,
        6 => Emotion::Fearful,
        // calm, disgust, surprised
        _ => return Ok(None),
    };
    Ok(Some(ClipRecord::bare(
        filename,
        CorpusKind::Ravdess,
        emotion,
        statement,
        repetition,
        format!("{actor:02}"),
    )))
}

/// Parses an EMO-DB name such as `03a01Fa.wav`: speaker, text code, emotion
/// letter, version letter.
///
/// Sentence ids number the ten texts: `a01`-`a05` are 1-5, `b01`-`b10` are
/// 6-15. Disgust (`E`) and boredom (`L`) return `Ok(None)`.
pub fn parse_emodb_name(filename: &str) -> Result<Option<ClipRecord>> {
    let base = basename(filename);
    let stem = base
        .strip_suffix(".wav")
        .ok_or_else(|| Error::manifest(filename, "not a .wav file"))?;
    let b = stem.as_bytes();
    if b.len() != 7 || !stem.is_ascii() {
        return Err(Error::manifest(
            filename,
            "expected <speaker:2><text:3><emotion:1><version:1>.wav",
        ));
    }
    let speaker = &stem[0..2];
    if !speaker.bytes().all(|c| c.is_ascii_digit()) {
        return Err(Error::manifest(filename, "speaker is not numeric"));
    }
    let text_num: u32 = stem[3..5]
        .parse()
        .map_err(|_| Error::manifest(filename, "text number is not numeric"))?;
    let sentence_id = match (b[2], text_num) {
        (b'a', 1..=5) => text_num,
        (b'b', 1..=10) => 5 + text_num,
        _ => {
            return Err(Error::manifest(
                filename,
                format!("unknown text code '{}'", &stem[2..5]),
            ))
        }
    };
    let emotion = match b[5] {
        b'N' => Emotion::Neutral,
        b'A' => Emotion::Fearful,
        b'F' => Emotion::Happy,
        b'T' => Emotion::Sad,
        b'W' => Emotion::Angry,
        b'E' | b'L' => return Ok(None),
        other => {
            return Err(Error::manifest(
                filename,
                format!("unknown emotion letter '{}'", other as char),
            ))
        }
    };
    if !b[6].is_ascii_lowercase() {
        return Err(Error::manifest(filename, "version must be a lowercase letter"));
    }
    let repetition = u32::from(b[6] - b'a') + 1;
    Ok(Some(ClipRecord::bare(
        filename,
        CorpusKind::EmoDb,
        emotion,
        sentence_id,
        repetition,
        speaker.to_string(),
    )))
}

/// Speaker metadata from a sidecar CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpeakerInfo {
    pub dialect: Dialect,
    pub group: SpeakerGroup,
}

fn normalize_speaker(id: &str) -> String {
    let t = id.trim();
    match t.parse::<u32>() {
        Ok(n) => format!("{n:02}"),
        Err(_) => t.to_string(),
    }
}

#[derive(Debug, Deserialize)]
struct SidecarRow {
    speaker_id: String,
    dialect: String,
    speaker_group: String,
}

/// Reads `speaker_id,dialect,speaker_group`.
pub fn read_sidecar(path: &Path) -> Result<BTreeMap<String, SpeakerInfo>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_sidecar(file, &path.display().to_string())
}

pub fn parse_sidecar(reader: impl std::io::Read, source: &str) -> Result<BTreeMap<String, SpeakerInfo>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut map = BTreeMap::new();
    for row in rdr.deserialize::<SidecarRow>() {
        let row = row.map_err(|e| Error::manifest(source, e.to_string()))?;
        let info = SpeakerInfo {
            dialect: row.dialect.parse()?,
            group: row.speaker_group.parse()?,
        };
        let id = normalize_speaker(&row.speaker_id);
        if map.insert(id.clone(), info).is_some() {
            return Err(Error::manifest(source, format!("speaker {id} listed twice")));
        }
    }
    Ok(map)
}

/// Ordered clip records plus summary data.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusManifest {
    pub root: PathBuf,
    records: Vec<ClipRecord>,
}

impl CorpusManifest {
    /// Sorts records by path and rejects duplicates.
    pub fn new(root: PathBuf, mut records: Vec<ClipRecord>) -> Result<Self> {
        records.sort_by(|a, b| a.path.cmp(&b.path));
        if let Some(w) = records.windows(2).find(|w| w[0].path == w[1].path) {
            return Err(Error::manifest(w[0].path.clone(), "duplicate path"));
        }
        Ok(Self { root, records })
    }

    pub fn records(&self) -> &[ClipRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn emotion_counts(&self) -> BTreeMap<Emotion, usize> {
        let mut counts: BTreeMap<Emotion, usize> = Emotion::ALL.into_iter().map(|e| (e, 0)).collect();
        for r in &self.records {
            *counts.entry(r.emotion).or_default() += 1;
        }
        counts
    }

    pub fn full_path(&self, record: &ClipRecord) -> PathBuf {
        self.root.join(&record.path)
    }

    /// SHA-256 over the CSV body (root excluded), hex encoded.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_csv().as_bytes());
        hex::encode(h.finalize())
    }

    pub fn has_speaker_metadata(&self) -> bool {
        self.records
            .iter()
            .all(|r| r.dialect.is_some() && r.speaker_group.is_some())
    }

    /// Attaches dialect and group to every record from `sidecar`.
    pub fn join_sidecar(&mut self, sidecar: &BTreeMap<String, SpeakerInfo>) -> Result<()> {
        for r in &mut self.records {
            let info = sidecar.get(&normalize_speaker(&r.speaker_id)).ok_or_else(|| {
                Error::manifest(r.path.clone(), format!("speaker {} missing from sidecar", r.speaker_id))
            })?;
            r.dialect = Some(info.dialect);
            r.speaker_group = Some(info.group);
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(MANIFEST_HEADER).expect("in-memory write");
        for r in &self.records {
            w.write_record([
                r.path.as_str(),
                r.corpus.name(),
                r.emotion.name(),
                &r.sentence_id.to_string(),
                &r.repetition.to_string(),
                &r.speaker_id,
                r.dialect.map(Dialect::name).unwrap_or(""),
                r.speaker_group.map(SpeakerGroup::name).unwrap_or(""),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV of UTF-8 fields")
    }

    pub fn from_csv(root: PathBuf, text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
            return Err(Error::manifest("manifest", format!("unexpected header {:?}", header)));
        }
        let mut records = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let path = row[0].to_string();
            let bad = |what: &str| Error::manifest(path.clone(), format!("invalid {what}"));
            let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
            records.push(ClipRecord {
                corpus: row[1].parse()?,
                emotion: row[2].parse()?,
                sentence_id: row[3].parse().map_err(|_| bad("sentence_id"))?,
                repetition: row[4].parse().map_err(|_| bad("repetition"))?,
                speaker_id: row[5].to_string(),
                dialect: opt(&row[6]).map(|s| s.parse()).transpose()?,
                speaker_group: opt(&row[7]).map(|s| s.parse()).transpose()?,
                path,
            });
        }
        Self::new(root, records)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, root: PathBuf) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(root, &text)
    }
}

pub const MANIFEST_HEADER: [&str; 8] = [
    "path",
    "corpus",
    "emotion",
    "sentence_id",
    "repetition",
    "speaker_id",
    "dialect",
    "speaker_group",
];

/// Recursively scans `root` for `.wav` files and parses each name with the
/// corpus convention. The scan keys on filename codes, not folder names.
pub fn build_manifest(root: &Path, corpus: CorpusKind, sidecar: Option<&Path>) -> Result<CorpusManifest> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "corpus root is not a directory"),
        ));
    }
    let mut records = Vec::new();
    let mut skipped = 0usize;
    for entry in WalkDir::new(root).follow_links(true) {
        let entry = entry.map_err(|e| Error::io(root, e.into()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let is_wav = entry
            .path()
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
        if !is_wav {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .expect("walkdir yields paths under root")
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        let parsed = match corpus {
            CorpusKind::Ased => Some(ased_record(&rel)?),
            CorpusKind::Ravdess => parse_ravdess_name(&rel)?,
            CorpusKind::EmoDb => parse_emodb_name(&rel)?,
        };
        match parsed {
            Some(mut r) => {
                r.path = rel;
                records.push(r);
            }
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::info!("{corpus}: skipped {skipped} clips outside the five-emotion speech subset");
    }
    let mut manifest = CorpusManifest::new(root.to_path_buf(), records)?;
    if let Some(path) = sidecar {
        manifest.join_sidecar(&read_sidecar(path)?)?;
    }
    Ok(manifest)
}

/// Speaker ids present in a manifest with their clip counts.
pub fn speakers(manifest: &CorpusManifest) -> HashMap<String, usize> {
    let mut m = HashMap::new();
    for r in manifest.records() {
        *m.entry(r.speaker_id.clone()).or_default() += 1;
    }
    m
}
