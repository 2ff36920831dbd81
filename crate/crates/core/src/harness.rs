//! Experiment orchestration and report emission.
//!
//! An experiment expands into cells (split plan x feature kind), trains one
//! VGGb per cell and model seed, and assembles a [`ResultTable`] in fixed row
//! order. Tables and per-cell artifacts are written by [`report`]. Result CSVs
//! hold no timing data so that fixed-seed reruns are byte-identical; wall
//! clock goes to a separate timing CSV.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{self, AudioClip};
use crate::corpus::{build_manifest, AsedName, CorpusKind, CorpusManifest, Emotion};
use crate::error::{Error, Result};
use crate::features::{write_feature_cache, FeatureCache, FeatureConfig, FeatureExtractor, FeatureKind, FeatureMatrix};
use crate::nn::{rng_for, Stream};
use crate::splits::{scheme_suite, Scheme, SplitPlan, DIALECT_SUITE, GROUP_SUITE};
use crate::vggb::{self, ConfusionMatrix, Example, TrainReport, VggbConfig};

#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExperimentId {
    E1_1,
    E1_2,
    E1_3,
    E1_4,
    E2,
    E3,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] = [
        ExperimentId::E1_1,
        ExperimentId::E1_2,
        ExperimentId::E1_3,
        ExperimentId::E1_4,
        ExperimentId::E2,
        ExperimentId::E3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::E1_1 => "E1_1",
            ExperimentId::E1_2 => "E1_2",
            ExperimentId::E1_3 => "E1_3",
            ExperimentId::E1_4 => "E1_4",
            ExperimentId::E2 => "E2",
            ExperimentId::E3 => "E3",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            ExperimentId::E1_1 => "Mel-spectrogram vs MFCC, random 90/10 splits",
            ExperimentId::E1_2 => "Sentence independence",
            ExperimentId::E1_3 => "Dialect independence",
            ExperimentId::E1_4 => "Speaker group independence",
            ExperimentId::E2 => "Model comparison",
            ExperimentId::E3 => "Cross-corpus comparison",
        }
    }

    pub fn scheme(self) -> Scheme {
        match self {
            ExperimentId::E1_1 | ExperimentId::E2 | ExperimentId::E3 => Scheme::Random90_10,
            ExperimentId::E1_2 => Scheme::SentenceIndependent,
            ExperimentId::E1_3 => Scheme::DialectIndependent,
            ExperimentId::E1_4 => Scheme::GroupIndependent,
        }
    }

    pub fn default_features(self) -> Vec<FeatureKind> {
        match self {
            ExperimentId::E2 | ExperimentId::E3 => vec![FeatureKind::Mfcc],
            _ => vec![FeatureKind::MelSpectrogramDb, FeatureKind::Mfcc],
        }
    }

    fn aggregated(self) -> bool {
        !matches!(self, ExperimentId::E2 | ExperimentId::E3)
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('.', "_");
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}' (E1_1, E1_2, E1_3, E1_4, E2, E3)")))
    }
}

/// Baseline rows of the model comparison, quoted rather than recomputed:
/// (model, accuracy %, wall clock).
pub const REFERENCE_BASELINES: [(&str, f64, &str); 3] = [
    ("LSTM", 66.94, "00:33:45"),
    ("Alex-Net", 81.82, "10:21:08"),
    ("ResNet50", 91.13, "08:44:15"),
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusRoots {
    pub ased: Option<PathBuf>,
    pub ased_sidecar: Option<PathBuf>,
    pub ravdess: Option<PathBuf>,
    pub emodb: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub roots: CorpusRoots,
    pub features: Vec<FeatureKind>,
    /// Model hyperparameters; `seed` offsets every model seed and
    /// `input_bands` is overridden per feature kind.
    pub model: VggbConfig,
    pub feature_config: FeatureConfig,
    /// Model seeds trained per table row; the cell value is their mean.
    pub seeds_per_row: usize,
    pub out_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
    /// Worker threads for cells; 0 uses every core.
    pub threads: usize,
    pub population_sd: bool,
}

impl ExperimentSpec {
    pub fn new(id: ExperimentId, roots: CorpusRoots, out_dir: PathBuf) -> Self {
        Self {
            id,
            roots,
            features: id.default_features(),
            model: VggbConfig::default(),
            feature_config: FeatureConfig::default(),
            seeds_per_row: 1,
            out_dir,
            cache_dir: None,
            threads: 0,
            population_sd: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::Config("no feature kinds selected".into()));
        }
        if self.seeds_per_row == 0 {
            return Err(Error::Config("seeds_per_row must be at least 1".into()));
        }
        if self.roots.ased.is_none() {
            return Err(Error::Config(format!("{} needs the ASED root (--root)", self.id)));
        }
        if matches!(self.id, ExperimentId::E1_3 | ExperimentId::E1_4) && self.roots.ased_sidecar.is_none() {
            return Err(Error::Metadata(format!(
                "{} needs speaker metadata (--sidecar)",
                self.id
            )));
        }
        if self.id == ExperimentId::E3 && (self.roots.ravdess.is_none() || self.roots.emodb.is_none()) {
            return Err(Error::Config("E3 needs both the RAVDESS and EMO-DB roots".into()));
        }
        Ok(())
    }
}

/// `HH:MM:SS`, rounded to the nearest second.
pub fn format_hms(secs: f64) -> String {
    let total = secs.max(0.0).round() as u64;
    format!("{:02}:{:02}:{:02}", total / 3600, total / 60 % 60, total % 60)
}

pub fn parse_hms(text: &str) -> Result<u64> {
    let parts: Vec<&str> = text.split(':').collect();
    let [h, m, s] = parts[..] else {
        return Err(Error::Config(format!("'{text}' is not HH:MM:SS")));
    };
    let num = |v: &str| {
        v.parse::<u64>()
            .map_err(|_| Error::Config(format!("'{text}' is not HH:MM:SS")))
    };
    let (h, m, s) = (num(h)?, num(m)?, num(s)?);
    if m >= 60 || s >= 60 {
        return Err(Error::Config(format!("'{text}' is not HH:MM:SS")));
    }
    Ok(h * 3600 + m * 60 + s)
}

/// Outcome of one (plan, feature) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub corpus: CorpusKind,
    pub row: usize,
    pub row_label: String,
    pub feature: FeatureKind,
    pub seeds: Vec<u64>,
    pub accuracy: Option<f64>,
    /// Counts summed over the cell's seeds.
    pub confusion: Option<ConfusionMatrix>,
    /// Curve of the first seed.
    pub curve: Option<TrainReport>,
    pub wall_clock_secs: f64,
    pub error: Option<String>,
}

impl Cell {
    fn file_stem(&self) -> String {
        let kind = match self.feature {
            FeatureKind::MelSpectrogramDb => "mel",
            FeatureKind::Mfcc => "mfcc",
        };
        format!(
            "{}_row{:02}_{kind}",
            self.corpus.name().to_ascii_lowercase(),
            self.row + 1
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub label: String,
    /// Accuracy in percent per column; `None` marks a failed cell.
    pub values: Vec<Option<f64>>,
    /// Quoted from the literature rather than measured.
    pub reference: bool,
    pub wall_clock: Option<String>,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub id: String,
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<ResultRow>,
    /// Emit Average and St. Dev. rows.
    pub aggregate: bool,
    pub population_sd: bool,
    pub metadata: BTreeMap<String, String>,
    #[serde(skip)]
    pub cells: Vec<Cell>,
}

/// Mean and (sample or population) standard deviation.
pub fn mean_sd(values: &[f64], population: bool) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let sd = match (population, n) {
        (true, _) => Some((ss / n as f64).sqrt()),
        (false, 1) => None,
        (false, _) => Some((ss / (n - 1) as f64).sqrt()),
    };
    (Some(mean), sd)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ResultTable {
    fn column_values(&self, c: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| !r.reference)
            .filter_map(|r| r.values[c])
            .collect()
    }

    pub fn average(&self) -> Vec<Option<f64>> {
        (0..self.columns.len())
            .map(|c| mean_sd(&self.column_values(c), self.population_sd).0)
            .collect()
    }

    pub fn std_dev(&self) -> Vec<Option<f64>> {
        (0..self.columns.len())
            .map(|c| mean_sd(&self.column_values(c), self.population_sd).1)
            .collect()
    }

    /// `condition,<columns>,source` followed by body rows and, when
    /// aggregated, `Average` and `St. Dev.` rows. Values print with full
    /// round-trip precision.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["condition".to_string()];
        header.extend(self.columns.iter().cloned());
        header.push("source".into());
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.label.clone()];
            rec.extend(r.values.iter().map(|v| fmt_opt(*v)));
            rec.push(if r.reference { "reference" } else { "measured" }.into());
            w.write_record(&rec).expect("in-memory write");
        }
        if self.aggregate {
            for (label, vals) in [("Average", self.average()), ("St. Dev.", self.std_dev())] {
                let mut rec = vec![label.to_string()];
                rec.extend(vals.into_iter().map(fmt_opt));
                rec.push("aggregate".into());
                w.write_record(&rec).expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 fields")
    }

    /// `condition,wall_clock,source`.
    pub fn timing_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["condition", "wall_clock", "source"])
            .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.label.as_str(),
                r.wall_clock.as_deref().unwrap_or(""),
                if r.reference { "reference" } else { "measured" },
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 fields")
    }

    /// Recall per emotion pooled over the cells of each feature kind, as
    /// `emotion,<feature columns>` in percent.
    pub fn per_emotion_csv(&self) -> String {
        let kinds: Vec<FeatureKind> = {
            let mut k: Vec<FeatureKind> = self.cells.iter().map(|c| c.feature).collect();
            k.sort_by_key(|f| f.label());
            k.dedup();
            k
        };
        let pooled: Vec<ConfusionMatrix> = kinds
            .iter()
            .map(|&k| {
                let mut cm = ConfusionMatrix::new(Emotion::ALL.len());
                for c in self.cells.iter().filter(|c| c.feature == k) {
                    if let Some(m) = &c.confusion {
                        cm.absorb(m);
                    }
                }
                cm
            })
            .collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["emotion".to_string()];
        header.extend(kinds.iter().map(|k| k.label().to_string()));
        w.write_record(&header).expect("in-memory write");
        for e in Emotion::ALL {
            let mut rec = vec![e.name().to_string()];
            rec.extend(
                pooled
                    .iter()
                    .map(|cm| fmt_opt(cm.per_class_accuracy()[e.index()].map(|a| a * 100.0))),
            );
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 fields")
    }

    /// Table plus aggregates as pretty JSON (no timing data).
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct View<'a> {
            #[serde(flatten)]
            table: &'a ResultTable,
            average: Option<Vec<Option<f64>>>,
            std_dev: Option<Vec<Option<f64>>>,
            failed_cells: Vec<String>,
        }
        let mut table = self.clone();
        for r in &mut table.rows {
            if !r.reference {
                r.wall_clock = None;
            }
        }
        let view = View {
            table: &table,
            average: self.aggregate.then(|| self.average()),
            std_dev: self.aggregate.then(|| self.std_dev()),
            failed_cells: self
                .cells
                .iter()
                .filter_map(|c| {
                    c.error
                        .as_ref()
                        .map(|e| format!("{} / {}: {e}", c.row_label, c.feature.label()))
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&view)? + "\n")
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes every table with its cell artifacts into `out_dir`:
///
/// - `index.json` listing the tables,
/// - `<id>/<id>.csv`, `<id>/<id>.json`, `<id>/<id>_timing.csv`,
///   `<id>/<id>_per_emotion.csv`,
/// - `<id>/cells/<stem>_confusion.csv` and `<stem>_curve.csv` per cell.
pub fn report(tables: &[ResultTable], out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let labels = Emotion::names();
    let mut index = Vec::new();
    for t in tables {
        let dir = out_dir.join(&t.id);
        let cells_dir = dir.join("cells");
        std::fs::create_dir_all(&cells_dir).map_err(|e| Error::io(&cells_dir, e))?;
        write_file(&dir.join(format!("{}.csv", t.id)), &t.to_csv())?;
        write_file(&dir.join(format!("{}.json", t.id)), &t.to_json()?)?;
        write_file(&dir.join(format!("{}_timing.csv", t.id)), &t.timing_csv())?;
        write_file(&dir.join(format!("{}_per_emotion.csv", t.id)), &t.per_emotion_csv())?;
        for c in &t.cells {
            if let Some(cm) = &c.confusion {
                write_file(
                    &cells_dir.join(format!("{}_confusion.csv", c.file_stem())),
                    &cm.to_csv(&labels),
                )?;
            }
            if let Some(curve) = &c.curve {
                write_file(&cells_dir.join(format!("{}_curve.csv", c.file_stem())), &curve.to_csv())?;
            }
        }
        index.push(serde_json::json!({
            "id": t.id,
            "title": t.title,
            "table": format!("{}/{}.csv", t.id, t.id),
        }));
    }
    write_file(
        &out_dir.join("index.json"),
        &(serde_json::to_string_pretty(&index)? + "\n"),
    )
}

/// Features for every manifest record in manifest order.
///
/// With a cache directory, features are read from (or written to) a
/// subdirectory keyed by feature kind and manifest checksum.
pub fn load_features(
    manifest: &CorpusManifest,
    kind: FeatureKind,
    extractor: &FeatureExtractor,
    cache_dir: Option<&Path>,
) -> Result<Vec<FeatureMatrix>> {
    let cache_path = cache_dir.map(|d| {
        let tag = match kind {
            FeatureKind::MelSpectrogramDb => "mel",
            FeatureKind::Mfcc => "mfcc",
        };
        d.join(format!("{tag}-{}", &manifest.checksum()[..16]))
    });
    if let Some(path) = &cache_path {
        if path.join(crate::features::CACHE_INDEX_FILE).is_file() {
            let cache = FeatureCache::open(path)?;
            if manifest.records().iter().all(|r| cache.contains(&r.path)) {
                log::info!("reusing cached features in {}", path.display());
                return manifest.records().iter().map(|r| cache.get(&r.path)).collect();
            }
        }
    }
    let feats: Vec<FeatureMatrix> = manifest
        .records()
        .par_iter()
        .map(|r| {
            let clip = audio::read_wav(&manifest.full_path(r))?;
            Ok(extractor.extract(&clip, kind)?.with_clip_id(r.path.clone()))
        })
        .collect::<Result<_>>()?;
    if let Some(path) = &cache_path {
        write_feature_cache(path, &feats)?;
    }
    Ok(feats)
}

/// Trains and evaluates one model per seed on a plan.
///
/// The held-out fold doubles as the validation set of the curve. Numerical
/// failures mark the cell as failed instead of aborting.
pub fn run_cell(
    manifest: &CorpusManifest,
    features: &[FeatureMatrix],
    plan: &SplitPlan,
    row: usize,
    model_cfg: &VggbConfig,
    seeds: &[u64],
) -> Result<Cell> {
    let feature = features
        .first()
        .map(|f| f.kind())
        .ok_or_else(|| Error::Config("no features".into()))?;
    let examples = |ids: &[usize]| -> Vec<Example<'_>> {
        ids.iter()
            .map(|&i| (&features[i], manifest.records()[i].label()))
            .collect()
    };
    let train_set = examples(&plan.train_ids);
    let test_set = examples(&plan.test_ids);
    let mut cfg = model_cfg.clone();
    cfg.input_bands = features[0].bands();
    cfg.input_frames = features[0].frames();
    let started = Instant::now();
    let mut cell = Cell {
        corpus: manifest.records().first().map_or(CorpusKind::Ased, |r| r.corpus),
        row,
        row_label: plan.label.clone(),
        feature,
        seeds: seeds.to_vec(),
        accuracy: None,
        confusion: None,
        curve: None,
        wall_clock_secs: 0.0,
        error: None,
    };
    let mut accs = Vec::new();
    let mut pooled = ConfusionMatrix::new(cfg.classes);
    for &seed in seeds {
        cfg.seed = seed;
        let mut model = vggb::build::<f32>(&cfg)?;
        let outcome = vggb::train(&mut model, &train_set, &test_set)
            .and_then(|rep| vggb::evaluate(&mut model, &test_set).map(|(acc, cm)| (rep, acc, cm)));
        match outcome {
            Ok((rep, acc, cm)) => {
                accs.push(acc);
                pooled.absorb(&cm);
                cell.curve.get_or_insert(rep);
            }
            Err(e @ Error::Numerics(_)) => {
                log::warn!("cell '{}' {} seed {seed} failed: {e}", plan.label, feature.label());
                cell.error = Some(e.to_string());
                cell.wall_clock_secs = started.elapsed().as_secs_f64() / seeds.len() as f64;
                return Ok(cell);
            }
            Err(e) => return Err(e),
        }
    }
    cell.accuracy = Some(accs.iter().sum::<f64>() / accs.len() as f64);
    cell.confusion = Some(pooled);
    cell.wall_clock_secs = started.elapsed().as_secs_f64() / seeds.len() as f64;
    Ok(cell)
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Runs every (plan, feature) cell of a suite on one corpus.
pub fn run_suite(
    manifest: &CorpusManifest,
    scheme: Scheme,
    spec: &ExperimentSpec,
    features: &[FeatureKind],
) -> Result<(Vec<SplitPlan>, Vec<Cell>)> {
    let plans = scheme_suite(manifest, scheme)?;
    let extractor = FeatureExtractor::new(spec.feature_config.clone())?;
    let pool = pool(spec.threads)?;
    let feats: Vec<Vec<FeatureMatrix>> = pool.install(|| {
        features
            .iter()
            .map(|&k| load_features(manifest, k, &extractor, spec.cache_dir.as_deref()))
            .collect::<Result<_>>()
    })?;
    let jobs: Vec<(usize, usize)> = (0..plans.len())
        .flat_map(|p| (0..features.len()).map(move |f| (p, f)))
        .collect();
    let cells = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, f)| {
                let base = spec.model.seed
                    + if scheme == Scheme::Random90_10 {
                        plans[p].seed
                    } else {
                        0
                    };
                let seeds: Vec<u64> = (0..spec.seeds_per_row as u64).map(|j| base + j).collect();
                run_cell(manifest, &feats[f], &plans[p], p, &spec.model, &seeds)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok((plans, cells))
}

fn mean_of(cells: &[&Cell]) -> (Option<f64>, Option<String>) {
    let accs: Vec<f64> = cells.iter().filter_map(|c| c.accuracy).collect();
    let secs: Vec<f64> = cells.iter().map(|c| c.wall_clock_secs).collect();
    let acc = (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64 * 100.0);
    let time = (!secs.is_empty()).then(|| format_hms(secs.iter().sum::<f64>() / secs.len() as f64));
    (acc, time)
}

fn load_manifest(root: &Path, corpus: CorpusKind, sidecar: Option<&Path>) -> Result<CorpusManifest> {
    let m = build_manifest(root, corpus, sidecar)?;
    if m.is_empty() {
        return Err(Error::manifest(root.display().to_string(), "no usable clips found"));
    }
    Ok(m)
}

/// Runs an experiment and assembles its table. Nothing is written; pass the
/// table to [`report`].
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let id = spec.id;
    let ased_root = spec.roots.ased.as_deref().expect("validated");
    let sidecar = spec.roots.ased_sidecar.as_deref();
    let mut metadata = BTreeMap::new();
    metadata.insert("scheme".into(), id.scheme().name().into());
    metadata.insert("seeds_per_row".into(), spec.seeds_per_row.to_string());
    metadata.insert("model_seed_offset".into(), spec.model.seed.to_string());
    metadata.insert("epochs".into(), spec.model.epochs.to_string());
    metadata.insert("batch_size".into(), spec.model.batch_size.to_string());
    metadata.insert("validation_set".into(), "held-out test fold".into());
    metadata.insert(
        "std_dev".into(),
        if spec.population_sd { "population" } else { "sample" }.into(),
    );

    let mut table = ResultTable {
        id: id.name().into(),
        title: id.title().into(),
        columns: Vec::new(),
        rows: Vec::new(),
        aggregate: id.aggregated(),
        population_sd: spec.population_sd,
        metadata,
        cells: Vec::new(),
    };

    match id {
        ExperimentId::E1_1 | ExperimentId::E1_2 | ExperimentId::E1_3 | ExperimentId::E1_4 => {
            let manifest = load_manifest(ased_root, CorpusKind::Ased, sidecar)?;
            table.metadata.insert("manifest_checksum".into(), manifest.checksum());
            let (plans, cells) = run_suite(&manifest, id.scheme(), spec, &spec.features)?;
            table.columns = spec.features.iter().map(|k| k.label().to_string()).collect();
            for (p, plan) in plans.iter().enumerate() {
                let row_cells: Vec<&Cell> = cells.iter().filter(|c| c.row == p).collect();
                let (_, time) = mean_of(&row_cells);
                table.rows.push(ResultRow {
                    label: plan.label.clone(),
                    values: spec
                        .features
                        .iter()
                        .map(|&k| {
                            row_cells
                                .iter()
                                .find(|c| c.feature == k)
                                .and_then(|c| c.accuracy.map(|a| a * 100.0))
                        })
                        .collect(),
                    reference: false,
                    wall_clock: time,
                    seeds: spec.seeds_per_row,
                });
            }
            table.cells = cells;
        }
        ExperimentId::E2 => {
            let manifest = load_manifest(ased_root, CorpusKind::Ased, sidecar)?;
            table.metadata.insert("manifest_checksum".into(), manifest.checksum());
            let kind = spec.features[0];
            let (plans, cells) = run_suite(&manifest, Scheme::Random90_10, spec, &[kind])?;
            table.columns = vec![format!("accuracy ({})", kind.label())];
            for (name, acc, time) in REFERENCE_BASELINES {
                table.rows.push(ResultRow {
                    label: name.into(),
                    values: vec![Some(acc)],
                    reference: true,
                    wall_clock: Some(time.into()),
                    seeds: 0,
                });
            }
            let (acc, time) = mean_of(&cells.iter().collect::<Vec<_>>());
            table.rows.push(ResultRow {
                label: "VGGb".into(),
                values: vec![acc],
                reference: false,
                wall_clock: time,
                seeds: plans.len() * spec.seeds_per_row,
            });
            table.cells = cells;
        }
        ExperimentId::E3 => {
            let kind = spec.features[0];
            table.columns = vec![format!("accuracy ({})", kind.label())];
            let corpora = [
                (
                    CorpusKind::Ravdess,
                    spec.roots.ravdess.as_deref().expect("validated"),
                    None,
                ),
                (CorpusKind::EmoDb, spec.roots.emodb.as_deref().expect("validated"), None),
                (CorpusKind::Ased, ased_root, sidecar),
            ];
            for (corpus, root, side) in corpora {
                let manifest = load_manifest(root, corpus, side)?;
                table.metadata.insert(
                    format!("manifest_checksum_{}", corpus.name().to_ascii_lowercase()),
                    manifest.checksum(),
                );
                let (plans, cells) = run_suite(&manifest, Scheme::Random90_10, spec, &[kind])?;
                let (acc, time) = mean_of(&cells.iter().collect::<Vec<_>>());
                table.rows.push(ResultRow {
                    label: corpus.name().into(),
                    values: vec![acc],
                    reference: false,
                    wall_clock: time,
                    seeds: plans.len() * spec.seeds_per_row,
                });
                table.cells.extend(cells);
            }
        }
    }
    Ok(table)
}

/// Synthetic stand-in corpus with five acoustically distinct classes.
///
/// Class `c` is a harmonic tone near `BASE_HZ[c]` mixed with white noise at a
/// class-specific level. Frequency, level, phase and noise are jittered per
/// clip from `(seed, clip index)`.
pub mod synthetic {
    use super::*;

    pub const BASE_HZ: [f64; 5] = [180.0, 320.0, 560.0, 980.0, 1700.0];
    pub const NOISE_LEVEL: [f64; 5] = [0.02, 0.05, 0.08, 0.12, 0.16];

    pub fn clip(class: usize, index: u64, seed: u64, duration_secs: f64, rate_hz: u32) -> Result<AudioClip> {
        if class >= BASE_HZ.len() {
            return Err(Error::Config(format!("synthetic class {class} outside 0..5")));
        }
        let mut rng = rng_for(
            seed,
            Stream::Synthetic {
                index: index * 8 + class as u64,
            },
        );
        let f0 = BASE_HZ[class] * (1.0 + rng.gen_range(-0.04..0.04));
        let gain = rng.gen_range(0.25..0.45);
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let noise = NOISE_LEVEL[class] * rng.gen_range(0.8..1.2);
        let n = (duration_secs * f64::from(rate_hz)).round() as usize;
        let sr = f64::from(rate_hz);
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / sr;
                let tone: f64 = (1..=4)
                    .map(|h| (std::f64::consts::TAU * f0 * h as f64 * t + phase * h as f64).sin() / h as f64)
                    .sum();
                let v = gain * tone / 2.0 + noise * rng.gen_range(-1.0..1.0);
                v.clamp(-1.0, 1.0)
            })
            .collect();
        AudioClip::new(samples, rate_hz, format!("synthetic/{class}/{index}"))
    }

    /// ASED-style name for clip `index` of `class`; unique for index < 910.
    ///
    /// Speakers and sentences cycle with coprime periods (13 and 7) so even
    /// a small corpus covers every sentence and, through the sidecar, every
    /// dialect and speaker group.
    pub fn name(class: usize, index: u64) -> AsedName {
        AsedName {
            emotion: Emotion::ALL[class],
            sentence_id: (index % 7) as u32 + 1,
            repetition: (index / 91 % 2) as u32 + 1,
            speaker: (index % 13 + 13 * (index / 182)) as u32 + 1,
        }
    }

    /// Writes `clips_per_class` WAVs per class under `dir/<emotion>/` plus a
    /// speaker sidecar `dir/speakers.csv`. Returns the sidecar path.
    pub fn write_corpus(
        dir: &Path,
        clips_per_class: u64,
        duration_secs: f64,
        rate_hz: u32,
        seed: u64,
    ) -> Result<PathBuf> {
        if clips_per_class > 7 * 2 * 65 {
            return Err(Error::Config("at most 910 synthetic clips per class".into()));
        }
        for (class, e) in Emotion::ALL.iter().enumerate() {
            let sub = dir.join(e.name());
            std::fs::create_dir_all(&sub).map_err(|err| Error::io(&sub, err))?;
            for index in 0..clips_per_class {
                let c = clip(class, index, seed, duration_secs, rate_hz)?;
                let path = sub.join(crate::corpus::format_ased_name(&name(class, index)));
                std::fs::write(&path, audio::encode_wav_pcm16(c.samples(), rate_hz))
                    .map_err(|err| Error::io(&path, err))?;
            }
        }
        let speakers = (0..clips_per_class).map(|i| name(0, i).speaker).max().unwrap_or(1);
        let mut text = String::from("speaker_id,dialect,speaker_group\n");
        for s in 1..=speakers {
            let i = s as usize - 1;
            text += &format!("{s:02},{},{}\n", DIALECT_SUITE[i % 4], GROUP_SUITE[i % 3]);
        }
        let sidecar = dir.join("speakers.csv");
        write_file(&sidecar, &text)?;
        Ok(sidecar)
    }
}
