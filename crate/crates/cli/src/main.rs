//! `emoser` command-line interface.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerics
//! error.

mod config;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use emoser::agreement::{agreement_report, read_ratings};
use emoser::corpus::{build_manifest, CorpusKind, CorpusManifest, Dialect, SpeakerGroup};
use emoser::features::{FeatureConfig, FeatureExtractor, FeatureKind, FeatureMatrix};
use emoser::harness::{self, load_features, CorpusRoots, ExperimentId, ExperimentSpec};
use emoser::splits::{self, Scheme, SplitPlan};
use emoser::vggb::{self, Example, VggbConfig};
use emoser::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "emoser",
    version,
    about = "Speech emotion recognition experiments on ASED, RAVDESS and EMO-DB"
)]
struct Cli {
    /// key=value file supplying defaults for the common flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Corpus root directory
    #[arg(long)]
    root: Option<PathBuf>,
    /// Speaker sidecar CSV (speaker_id,dialect,speaker_group)
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Corpus naming convention: ased, ravdess or emodb
    #[arg(long)]
    corpus: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// mfcc or mel
    #[arg(long)]
    feature: Option<String>,
    /// Output file or directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Feature cache directory
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Corpus manifests
    Manifest {
        #[command(subcommand)]
        action: ManifestAction,
    },
    /// Feature extraction
    Features {
        #[command(subcommand)]
        action: FeaturesAction,
    },
    /// Train/test split plans
    Split {
        #[command(subcommand)]
        action: SplitAction,
    },
    /// Train VGGb on the train side of a plan and save a checkpoint
    Train {
        #[command(flatten)]
        common: Common,
        /// Plan JSON; defaults to a random 90/10 split with --seed
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the test side of a plan
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Fleiss kappa report from a ratings CSV (recording_id,judge_id,decision)
    Kappa {
        #[arg(long)]
        ratings: PathBuf,
        /// Report JSON path; printed to stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Experiment suites
    Experiment {
        #[command(subcommand)]
        action: ExperimentAction,
    },
}

#[derive(Subcommand, Debug)]
enum ManifestAction {
    /// Scan a corpus root and write the manifest CSV
    Build {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand, Debug)]
enum FeaturesAction {
    /// Extract features for every manifest record into a cache directory
    Extract {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand, Debug)]
enum SplitAction {
    /// Write one plan, or a whole scheme suite with --suite
    Make {
        #[command(flatten)]
        common: Common,
        /// random, sentence, dialect or group
        #[arg(long, default_value = "random")]
        scheme: String,
        #[arg(long, default_value_t = splits::DEFAULT_TEST_FRACTION)]
        test_fraction: f64,
        /// Stratify the random split by emotion
        #[arg(long)]
        stratified: bool,
        /// Comma-separated held-out sentence ids, e.g. 6,7
        #[arg(long)]
        test_sentences: Option<String>,
        #[arg(long)]
        test_dialect: Option<String>,
        #[arg(long)]
        test_group: Option<String>,
        /// Write every plan of the scheme's suite into the --out directory
        #[arg(long)]
        suite: bool,
    },
}

#[derive(Subcommand, Debug)]
enum ExperimentAction {
    /// Run E1_1, E1_2, E1_3, E1_4, E2 or E3 and write its report
    Run {
        id: String,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ravdess: Option<PathBuf>,
        #[arg(long)]
        emodb: Option<PathBuf>,
        /// Worker threads for experiment cells (0 = all cores)
        #[arg(long)]
        threads: Option<usize>,
        /// Model seeds averaged per table row
        #[arg(long)]
        seeds_per_row: Option<usize>,
        /// Report population instead of sample standard deviation
        #[arg(long)]
        population_sd: bool,
    },
}

/// Flag values with config-file fallbacks.
struct Settings {
    common: Common,
    file: BTreeMap<String, String>,
}

impl Settings {
    fn new(common: Common, file: BTreeMap<String, String>) -> Self {
        Self { common, file }
    }

    fn file_value<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.file.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("config value '{v}' for '{key}' is invalid"))),
        }
    }

    fn pick<T: FromStr + Clone>(&self, flag: &Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v.clone())),
            None => self.file_value(key),
        }
    }

    fn root(&self) -> Result<PathBuf> {
        self.pick(&self.common.root, "root")?
            .ok_or_else(|| Error::Config("--root is required".into()))
    }

    fn sidecar(&self) -> Result<Option<PathBuf>> {
        self.pick(&self.common.sidecar, "sidecar")
    }

    fn out(&self) -> Result<PathBuf> {
        self.pick(&self.common.out, "out")?
            .ok_or_else(|| Error::Config("--out is required".into()))
    }

    fn cache(&self) -> Result<Option<PathBuf>> {
        self.pick(&self.common.cache, "cache")
    }

    fn seed(&self) -> Result<u64> {
        Ok(self.pick(&self.common.seed, "seed")?.unwrap_or(0))
    }

    fn corpus(&self) -> Result<CorpusKind> {
        match self.pick(&self.common.corpus, "corpus")? {
            Some(s) => s
                .parse()
                .map_err(|_| Error::Config(format!("unknown corpus '{s}' (ased, ravdess, emodb)"))),
            None => Ok(CorpusKind::Ased),
        }
    }

    fn feature(&self) -> Result<Option<FeatureKind>> {
        self.pick(&self.common.feature, "feature")?
            .map(|s: String| s.parse())
            .transpose()
    }

    fn model(&self) -> Result<VggbConfig> {
        let mut cfg = VggbConfig::default();
        if let Some(e) = self.pick(&self.common.epochs, "epochs")? {
            cfg.epochs = e;
        }
        if let Some(b) = self.pick(&self.common.batch_size, "batch_size")? {
            cfg.batch_size = b;
        }
        cfg.seed = self.seed()?;
        Ok(cfg)
    }

    fn manifest(&self) -> Result<CorpusManifest> {
        build_manifest(&self.root()?, self.corpus()?, self.sidecar()?.as_deref())
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn features_for(s: &Settings, manifest: &CorpusManifest, kind: FeatureKind) -> Result<Vec<FeatureMatrix>> {
    let extractor = FeatureExtractor::new(FeatureConfig::default())?;
    load_features(manifest, kind, &extractor, s.cache()?.as_deref())
}

fn check_plan(plan: &SplitPlan, manifest: &CorpusManifest) -> Result<()> {
    if plan.manifest_checksum != manifest.checksum() {
        return Err(Error::manifest(
            manifest.root.display().to_string(),
            "plan was made for a different manifest (checksum mismatch)",
        ));
    }
    plan.check_partition(manifest.len())
}

fn examples<'a>(manifest: &CorpusManifest, feats: &'a [FeatureMatrix], ids: &[usize]) -> Vec<Example<'a>> {
    ids.iter()
        .map(|&i| (&feats[i], manifest.records()[i].label()))
        .collect()
}

fn manifest_build(s: &Settings) -> Result<()> {
    let m = s.manifest()?;
    let out = s.out()?;
    write_text(&out, &m.to_csv())?;
    let counts: Vec<String> = m.emotion_counts().iter().map(|(e, n)| format!("{e} {n}")).collect();
    println!("{} clips ({}); checksum {}", m.len(), counts.join(", "), m.checksum());
    Ok(())
}

fn features_extract(s: &Settings) -> Result<()> {
    let m = s.manifest()?;
    let kind = s.feature()?.unwrap_or(FeatureKind::Mfcc);
    let out = s.out()?;
    let extractor = FeatureExtractor::new(FeatureConfig::default())?;
    let feats = load_features(&m, kind, &extractor, None)?;
    emoser::features::write_feature_cache(&out, &feats)?;
    let shape = feats
        .first()
        .map(|f| format!("{}x{}", f.bands(), f.frames()))
        .unwrap_or_default();
    println!(
        "{} {} matrices of {shape} written to {}",
        feats.len(),
        kind.label(),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn split_make(
    s: &Settings,
    scheme: &str,
    test_fraction: f64,
    stratified: bool,
    test_sentences: Option<&str>,
    test_dialect: Option<&str>,
    test_group: Option<&str>,
    suite: bool,
) -> Result<()> {
    let m = s.manifest()?;
    let scheme: Scheme = scheme.parse()?;
    let out = s.out()?;
    if suite {
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        for (i, plan) in splits::scheme_suite(&m, scheme)?.iter().enumerate() {
            let path = out.join(format!("{scheme}_{:02}.json", i + 1));
            plan.save(&path)?;
            println!(
                "{}: {} train / {} test -> {}",
                plan.label,
                plan.train_ids.len(),
                plan.test_ids.len(),
                path.display()
            );
        }
        return Ok(());
    }
    let plan = match scheme {
        Scheme::Random90_10 => splits::random_split(&m, test_fraction, s.seed()?, stratified)?,
        Scheme::SentenceIndependent => {
            let text = test_sentences.ok_or_else(|| Error::Config("--test-sentences is required".into()))?;
            let set: BTreeSet<u32> = text
                .split([',', '+'])
                .map(|t| {
                    t.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad sentence id '{t}'")))
                })
                .collect::<Result<_>>()?;
            splits::sentence_split(&m, &set)?
        }
        Scheme::DialectIndependent => {
            let d: Dialect = test_dialect
                .ok_or_else(|| Error::Config("--test-dialect is required".into()))?
                .parse()
                .map_err(|e: Error| Error::Config(e.to_string()))?;
            splits::dialect_split(&m, d)?
        }
        Scheme::GroupIndependent => {
            let g: SpeakerGroup = test_group
                .ok_or_else(|| Error::Config("--test-group is required".into()))?
                .parse()
                .map_err(|e: Error| Error::Config(e.to_string()))?;
            splits::group_split(&m, g)?
        }
    };
    plan.save(&out)?;
    println!(
        "{}: {} train / {} test -> {}",
        plan.label,
        plan.train_ids.len(),
        plan.test_ids.len(),
        out.display()
    );
    Ok(())
}

fn train(s: &Settings, plan_path: Option<&Path>) -> Result<()> {
    let m = s.manifest()?;
    let plan = match plan_path {
        Some(p) => SplitPlan::load(p)?,
        None => splits::random_split(&m, splits::DEFAULT_TEST_FRACTION, s.seed()?, false)?,
    };
    check_plan(&plan, &m)?;
    let kind = s.feature()?.unwrap_or(FeatureKind::Mfcc);
    let feats = features_for(s, &m, kind)?;
    let mut cfg = s.model()?;
    cfg.input_bands = feats[0].bands();
    cfg.input_frames = feats[0].frames();
    let out = s.out()?;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let mut model = vggb::build::<f32>(&cfg)?;
    let train_set = examples(&m, &feats, &plan.train_ids);
    let test_set = examples(&m, &feats, &plan.test_ids);
    let report = vggb::train(&mut model, &train_set, &test_set)?;
    vggb::save_checkpoint(&model, cfg.epochs, &out.join("model.ckpt"))?;
    write_text(&out.join("curve.csv"), &report.to_csv())?;
    plan.save(&out.join("plan.json"))?;
    println!(
        "{} epochs, {} steps, {} parameters, wall clock {}; final held-out accuracy {}",
        report.epochs.len(),
        report.steps,
        report.param_count,
        harness::format_hms(report.wall_clock_secs),
        report
            .final_val_acc()
            .map(|a| format!("{:.2}%", a * 100.0))
            .unwrap_or_else(|| "n/a".into())
    );
    Ok(())
}

fn eval(s: &Settings, plan_path: &Path, checkpoint: &Path) -> Result<()> {
    let m = s.manifest()?;
    let plan = SplitPlan::load(plan_path)?;
    check_plan(&plan, &m)?;
    let (mut model, header) = vggb::load_checkpoint(checkpoint)?;
    let kind = match s.feature()? {
        Some(k) => k,
        None if model.config().input_bands == FeatureKind::MelSpectrogramDb.bands() => FeatureKind::MelSpectrogramDb,
        None => FeatureKind::Mfcc,
    };
    let feats = features_for(s, &m, kind)?;
    let test_set = examples(&m, &feats, &plan.test_ids);
    let (acc, cm) = vggb::evaluate(&mut model, &test_set)?;
    if let Some(out) = s.pick(&s.common.out, "out")? {
        write_text(&out, &cm.to_csv(&emoser::corpus::Emotion::names()))?;
    }
    println!(
        "accuracy {:.2}% on {} test clips (checkpoint seed {}, epoch {})",
        acc * 100.0,
        test_set.len(),
        header.seed,
        header.epoch
    );
    Ok(())
}

fn kappa(ratings: &Path, out: Option<&Path>) -> Result<()> {
    let sets = read_ratings(ratings)?;
    let report = agreement_report(&sets)?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    match out {
        Some(p) => {
            write_text(p, &json)?;
            if let Some(k) = report.pooled {
                println!("pooled kappa {:.4} over {} recordings", k.kappa, k.subjects);
            }
        }
        None => print!("{json}"),
    }
    Ok(())
}

struct ExperimentArgs<'a> {
    id: &'a str,
    ravdess: Option<PathBuf>,
    emodb: Option<PathBuf>,
    threads: Option<usize>,
    seeds_per_row: Option<usize>,
    population_sd: bool,
}

fn experiment(s: &Settings, a: ExperimentArgs<'_>) -> Result<()> {
    let id: ExperimentId = a.id.parse()?;
    let roots = CorpusRoots {
        ased: Some(s.root()?),
        ased_sidecar: s.sidecar()?,
        ravdess: s.pick(&a.ravdess, "ravdess")?,
        emodb: s.pick(&a.emodb, "emodb")?,
    };
    let out = s.out()?;
    let mut spec = ExperimentSpec::new(id, roots, out.clone());
    spec.model = s.model()?;
    if let Some(k) = s.feature()? {
        spec.features = vec![k];
    }
    spec.cache_dir = Some(s.cache()?.unwrap_or_else(|| out.join("cache")));
    spec.threads = s.pick(&a.threads, "threads")?.unwrap_or(0);
    spec.seeds_per_row = s.pick(&a.seeds_per_row, "seeds_per_row")?.unwrap_or(1);
    spec.population_sd = a.population_sd || s.file_value("population_sd")?.unwrap_or(false);
    let table = harness::run_experiment(&spec)?;
    harness::report(std::slice::from_ref(&table), &out)?;
    print!("{}", table.to_csv());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => config::load(p)?,
        None => BTreeMap::new(),
    };
    let settings = |common: &Common| Settings::new(common.clone(), file.clone());
    match cli.command {
        Command::Manifest {
            action: ManifestAction::Build { common },
        } => manifest_build(&settings(&common)),
        Command::Features {
            action: FeaturesAction::Extract { common },
        } => features_extract(&settings(&common)),
        Command::Split {
            action:
                SplitAction::Make {
                    common,
                    scheme,
                    test_fraction,
                    stratified,
                    test_sentences,
                    test_dialect,
                    test_group,
                    suite,
                },
        } => split_make(
            &settings(&common),
            &scheme,
            test_fraction,
            stratified,
            test_sentences.as_deref(),
            test_dialect.as_deref(),
            test_group.as_deref(),
            suite,
        ),
        Command::Train { common, plan } => train(&settings(&common), plan.as_deref()),
        Command::Eval {
            common,
            plan,
            checkpoint,
        } => eval(&settings(&common), &plan, &checkpoint),
        Command::Kappa { ratings, out } => kappa(&ratings, out.as_deref()),
        Command::Experiment {
            action:
                ExperimentAction::Run {
                    id,
                    common,
                    ravdess,
                    emodb,
                    threads,
                    seeds_per_row,
                    population_sd,
                },
        } => experiment(
            &settings(&common),
            ExperimentArgs {
                id: &id,
                ravdess,
                emodb,
                threads,
                seeds_per_row,
                population_sd,
            },
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
