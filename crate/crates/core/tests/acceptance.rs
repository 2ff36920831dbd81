//! Acceptance runner: one PASS/FAIL/SKIP line per criterion.
//!
//! Criteria that need external corpora read their locations from
//! `ASED_ROOT`, `ASED_SIDECAR` and `EMODB_ROOT` and are skipped when those are
//! unset. A criterion listed in `KNOWN_UNATTAINABLE` still runs and still
//! prints FAIL, but does not fail the process.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use emoser::agreement::{fleiss_kappa, RatingMatrix};
use emoser::corpus::{build_manifest, ClipRecord, CorpusKind, CorpusManifest, Emotion};
use emoser::dsp::{Dct, Fft};
use emoser::features::{FeatureConfig, FeatureExtractor, FeatureKind};
use emoser::harness::{
    self, load_features, run_cell, synthetic, CorpusRoots, ExperimentId, ExperimentSpec, ResultTable,
};
use emoser::nn::Tensor;
use emoser::splits::{scheme_suite, Scheme, DIALECT_SUITE, GROUP_SUITE, SENTENCE_SUITE};
use emoser::vggb::{self, VggbConfig};

/// Criterion 2 asks for an 8x12 input, which four 2x2 pools cannot consume.
const KNOWN_UNATTAINABLE: &[u32] = &[2];

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

// 1. FFT and DCT against direct sums.
fn feature_oracles() -> Outcome {
    const TOL: f64 = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let lengths = [64usize, 257, 1024, 2048];
    let mut worst_fft: f64 = 0.0;
    let mut worst_dct: f64 = 0.0;
    for i in 0..100 {
        let n = lengths[i % lengths.len()];
        let real: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cplx: Vec<Complex64> = real
            .iter()
            .map(|&r| Complex64::new(r, rng.gen_range(-1.0..1.0)))
            .collect();
        let mut fast = cplx.clone();
        Fft::new(n).forward(&mut fast);
        worst_fft = worst_fft.max(common::max_abs_diff_c(&fast, &common::naive_dft(&cplx)));
        worst_dct = worst_dct.max(common::max_abs_diff(
            &Dct::new(n).forward(&real),
            &common::naive_dct2(&real),
        ));
    }
    check(
        worst_fft < TOL && worst_dct < TOL,
        format!("max abs err FFT {worst_fft:.2e}, DCT-II {worst_dct:.2e} (tol {TOL:.0e}; length 257 via Bluestein)"),
    )
}

fn mini_config(bands: usize, frames: usize) -> VggbConfig {
    VggbConfig {
        input_bands: bands,
        input_frames: frames,
        conv_filters: vec![2, 2, 2, 2],
        dropout: 0.0,
        dense_units: 4,
        classes: 3,
        seed: 11,
        ..VggbConfig::default()
    }
}

fn mini_gradcheck(bands: usize, frames: usize) -> emoser::Result<(f64, usize)> {
    let mut model = vggb::build::<f64>(&mini_config(bands, frames))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let batch = 3;
    let x = Tensor::new(
        vec![batch, 1, bands, frames],
        (0..batch * bands * frames).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )?;
    let (err, count, _) = common::gradient_check(model.network_mut(), &x, &[0, 1, 2], 1e-4, 1e-8);
    Ok((err, count))
}

// 2. Backprop against central differences on a miniature VGGb.
fn gradient_suite() -> Outcome {
    const TOL: f64 = 1e-4;
    let literal = match mini_gradcheck(8, 12) {
        Ok((err, n)) => {
            return check(
                err < TOL,
                format!("8x12: max rel err {err:.2e} over {n} params (tol {TOL:.0e})"),
            )
        }
        Err(e) => e.to_string(),
    };
    match mini_gradcheck(16, 24) {
        Ok((err, n)) => Outcome::Fail(format!(
            "8x12 input rejected ({literal}); same check at 16x24: max rel err {err:.2e} over {n} params (tol {TOL:.0e}) {}",
            if err < TOL { "passes" } else { "FAILS" }
        )),
        Err(e) => Outcome::Fail(format!("8x12 rejected ({literal}); 16x24 also failed: {e}")),
    }
}

// 3. Fleiss kappa anchors.
fn kappa_suite() -> Outcome {
    let complete = RatingMatrix::new(&[vec![8, 0, 0, 0, 0], vec![0, 0, 8, 0, 0], vec![0, 0, 0, 0, 8]]).unwrap();
    let k_complete = fleiss_kappa(&complete).unwrap();
    let worked = RatingMatrix::new(&[vec![2, 0], vec![1, 1]]).unwrap();
    let k_worked = fleiss_kappa(&worked).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let rows: Vec<Vec<u32>> = (0..10_000)
        .map(|_| {
            let mut r = vec![0u32; 5];
            for _ in 0..8 {
                r[rng.gen_range(0..5)] += 1;
            }
            r
        })
        .collect();
    let k_random = fleiss_kappa(&RatingMatrix::new(&rows).unwrap()).unwrap();
    check(
        k_complete == 1.0 && (k_worked + 1.0 / 3.0).abs() < 1e-12 && k_random.abs() < 0.05,
        format!("complete {k_complete}, worked {k_worked:.15} (target -1/3, tol 1e-12), uniform N=1e4 {k_random:.4} (|k| < 0.05)"),
    )
}

fn random_manifest(rng: &mut ChaCha8Rng) -> CorpusManifest {
    let n = rng.gen_range(24..240);
    let records = (0..n)
        .map(|i| {
            // the first records cover every attribute value so every suite row exists
            let pick = |k: usize, rng: &mut ChaCha8Rng| if i < 12 { i % k } else { rng.gen_range(0..k) };
            ClipRecord {
                path: format!("c{i:04}.wav"),
                corpus: CorpusKind::Ased,
                emotion: Emotion::ALL[pick(5, rng)],
                sentence_id: pick(7, rng) as u32 + 1,
                repetition: pick(2, rng) as u32 + 1,
                speaker_id: format!("{:02}", pick(65, rng) + 1),
                dialect: Some(DIALECT_SUITE[pick(4, rng)]),
                speaker_group: Some(GROUP_SUITE[pick(3, rng)]),
            }
        })
        .collect();
    CorpusManifest::new(PathBuf::new(), records).unwrap()
}

fn leakage(m: &CorpusManifest, plan: &emoser::splits::SplitPlan) -> Result<(), String> {
    let train: BTreeSet<usize> = plan.train_ids.iter().copied().collect();
    let test: BTreeSet<usize> = plan.test_ids.iter().copied().collect();
    if !train.is_disjoint(&test) {
        return Err(format!("{}: train and test overlap", plan.label));
    }
    if train.len() + test.len() != m.len() || train.iter().chain(&test).any(|&i| i >= m.len()) {
        return Err(format!("{}: does not cover the manifest", plan.label));
    }
    let r = m.records();
    let attr_disjoint = |f: &dyn Fn(&ClipRecord) -> String| {
        let a: BTreeSet<String> = train.iter().map(|&i| f(&r[i])).collect();
        let b: BTreeSet<String> = test.iter().map(|&i| f(&r[i])).collect();
        a.is_disjoint(&b) && !b.is_empty()
    };
    let ok = match plan.scheme {
        Scheme::Random90_10 => test.len() == (m.len() as f64 * 0.1).round() as usize,
        Scheme::SentenceIndependent => attr_disjoint(&|c| c.sentence_id.to_string()),
        Scheme::DialectIndependent => attr_disjoint(&|c| format!("{:?}", c.dialect)),
        Scheme::GroupIndependent => attr_disjoint(&|c| format!("{:?}", c.speaker_group)),
    };
    if ok {
        Ok(())
    } else {
        Err(format!("{}: scheme invariant violated", plan.label))
    }
}

// 4. Split leakage over random manifests.
fn split_leakage() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut plans = 0;
    for _ in 0..1000 {
        let m = random_manifest(&mut rng);
        for scheme in Scheme::ALL {
            let suite = match scheme_suite(&m, scheme) {
                Ok(s) => s,
                Err(e) => return Outcome::Fail(format!("{scheme} suite failed: {e}")),
            };
            let expected = match scheme {
                Scheme::Random90_10 => 5,
                Scheme::SentenceIndependent => SENTENCE_SUITE.len(),
                Scheme::DialectIndependent => 4,
                Scheme::GroupIndependent => 3,
            };
            if suite.len() != expected {
                return Outcome::Fail(format!("{scheme} suite has {} plans", suite.len()));
            }
            for p in &suite {
                if let Err(e) = leakage(&m, p) {
                    return Outcome::Fail(e);
                }
                plans += 1;
            }
        }
    }
    Outcome::Pass(format!(
        "1000 manifests, {plans} plans: disjoint, covering, attribute-exclusive"
    ))
}

// 5. Synthetic corpus through the full pipeline.
fn synthetic_end_to_end() -> Outcome {
    const SEED: u64 = 0;
    const PREFIX_EPOCHS: usize = 5;
    let dir = tempfile::tempdir().expect("tempdir");
    let run = || -> emoser::Result<(emoser::harness::Cell, emoser::harness::Cell)> {
        synthetic::write_corpus(dir.path(), 100, 2.0, 22_050, SEED)?;
        let manifest = build_manifest(dir.path(), CorpusKind::Ased, None)?;
        let extractor = FeatureExtractor::new(FeatureConfig::default())?;
        let feats = load_features(&manifest, FeatureKind::Mfcc, &extractor, None)?;
        let plan = emoser::splits::random_split(&manifest, 0.10, SEED, false)?;
        let full = run_cell(&manifest, &feats, &plan, 0, &VggbConfig::default(), &[SEED])?;
        // Replay: rebuild features and split from disk, retrain a prefix.
        let feats2 = load_features(&manifest, FeatureKind::Mfcc, &extractor, None)?;
        let plan2 = emoser::splits::random_split(&manifest, 0.10, SEED, false)?;
        assert_eq!(plan, plan2);
        let short = VggbConfig {
            epochs: PREFIX_EPOCHS,
            ..VggbConfig::default()
        };
        let replay = run_cell(&manifest, &feats2, &plan2, 0, &short, &[SEED])?;
        Ok((full, replay))
    };
    match run() {
        Ok((full, replay)) => {
            let acc = full.accuracy.unwrap_or(0.0);
            let curve = full.curve.as_ref().map(|c| &c.epochs[..PREFIX_EPOCHS]);
            let replayed = replay.curve.as_ref().map(|c| &c.epochs[..]);
            let same = curve.is_some() && curve == replayed;
            check(
                acc >= 0.95 && same,
                format!(
                    "held-out accuracy {:.2}% (>= 95%), {} epochs; seeded replay of first {PREFIX_EPOCHS} epochs {}",
                    acc * 100.0,
                    full.curve.as_ref().map_or(0, |c| c.epochs.len()),
                    if same { "bit-identical" } else { "DIFFERS" }
                ),
            )
        }
        Err(e) => Outcome::Fail(e.to_string()),
    }
}

fn env_path(var: &str) -> Option<PathBuf> {
    std::env::var_os(var).map(PathBuf::from).filter(|p| p.exists())
}

fn ased_spec(id: ExperimentId, out: &Path) -> Option<ExperimentSpec> {
    let roots = CorpusRoots {
        ased: Some(env_path("ASED_ROOT")?),
        ased_sidecar: env_path("ASED_SIDECAR"),
        ..Default::default()
    };
    let mut spec = ExperimentSpec::new(id, roots, out.to_path_buf());
    spec.cache_dir = Some(out.join("cache"));
    Some(spec)
}

// 6. Published random-split accuracies on ASED.
fn ased_reproduction() -> Outcome {
    let out = tempfile::tempdir().expect("tempdir");
    let Some(spec) = ased_spec(ExperimentId::E1_1, out.path()) else {
        return Outcome::Skip("ASED_ROOT not set".into());
    };
    let table = match harness::run_experiment(&spec) {
        Ok(t) => t,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let avg = table.average();
    let (mel, mfcc) = (avg[0].unwrap_or(f64::NAN), avg[1].unwrap_or(f64::NAN));
    let gaps: Vec<f64> = table
        .rows
        .iter()
        .map(|r| r.values[1].unwrap_or(f64::NAN) - r.values[0].unwrap_or(f64::NAN))
        .collect();
    check(
        (mfcc - 90.73).abs() <= 6.0 && (mel - 81.05).abs() <= 6.0 && gaps.iter().all(|&g| g >= 4.0),
        format!(
            "mean MFCC {mfcc:.2}% (90.73 +/- 6), Mel {mel:.2}% (81.05 +/- 6), per-seed MFCC-Mel gaps {gaps:.2?} (>= 4)"
        ),
    )
}

// 7. EMO-DB cross-corpus number.
fn emodb_reproduction() -> Outcome {
    let Some(root) = env_path("EMODB_ROOT") else {
        return Outcome::Skip("EMODB_ROOT not set".into());
    };
    let run = || -> emoser::Result<(usize, f64)> {
        let manifest = build_manifest(&root, CorpusKind::EmoDb, None)?;
        let out = tempfile::tempdir().expect("tempdir");
        let roots = CorpusRoots {
            ased: Some(root.clone()),
            ..Default::default()
        };
        let spec = ExperimentSpec::new(ExperimentId::E2, roots, out.path().to_path_buf());
        let (_, cells) = harness::run_suite(&manifest, Scheme::Random90_10, &spec, &[FeatureKind::Mfcc])?;
        let accs: Vec<f64> = cells.iter().filter_map(|c| c.accuracy).collect();
        Ok((manifest.len(), accs.iter().sum::<f64>() / accs.len() as f64 * 100.0))
    };
    match run() {
        Ok((n, acc)) => check(
            (acc - 88.71).abs() <= 6.0,
            format!("{n} clips in the five-emotion subset, mean accuracy {acc:.2}% (88.71 +/- 6)"),
        ),
        Err(e) => Outcome::Fail(e.to_string()),
    }
}

// 8. MFCC beats Mel in every independence row.
fn independence_directionality() -> Outcome {
    if env_path("ASED_ROOT").is_none() || env_path("ASED_SIDECAR").is_none() {
        return Outcome::Skip("ASED_ROOT and ASED_SIDECAR not set".into());
    }
    let out = tempfile::tempdir().expect("tempdir");
    let mut lines = Vec::new();
    let mut ok = true;
    for id in [ExperimentId::E1_2, ExperimentId::E1_3, ExperimentId::E1_4] {
        let spec = ased_spec(id, out.path()).expect("checked above");
        match harness::run_experiment(&spec) {
            Ok(t) => {
                for r in &t.rows {
                    let (mel, mfcc) = (r.values[0], r.values[1]);
                    let win = matches!((mel, mfcc), (Some(a), Some(b)) if b > a);
                    ok &= win;
                    lines.push(format!("{id} {}: {mfcc:.2?} vs {mel:.2?}", r.label));
                }
            }
            Err(e) => return Outcome::Fail(format!("{id}: {e}")),
        }
    }
    check(ok, lines.join("; "))
}

fn write_named(dir: &Path, name: &str, class: usize, index: u64) -> emoser::Result<()> {
    let clip = synthetic::clip(class, index, 9, 0.6, 16_000)?;
    std::fs::write(dir.join(name), emoser::audio::encode_wav_pcm16(clip.samples(), 16_000))
        .map_err(|e| emoser::Error::io(dir, e))
}

/// Small synthetic stand-ins for all three corpora.
fn tiny_corpora(base: &Path) -> emoser::Result<CorpusRoots> {
    let ased = base.join("ased");
    let sidecar = synthetic::write_corpus(&ased, 14, 0.6, 16_000, 3)?;
    let ravdess = base.join("ravdess");
    let emodb = base.join("emodb");
    std::fs::create_dir_all(&ravdess)
        .and_then(|_| std::fs::create_dir_all(&emodb))
        .map_err(|e| emoser::Error::io(base, e))?;
    let ravdess_codes = [1, 6, 3, 4, 5];
    let emodb_letters = ['N', 'A', 'F', 'T', 'W'];
    for class in 0..5 {
        for i in 0..6u64 {
            let name = format!(
                "03-01-{:02}-01-{:02}-{:02}-{:02}.wav",
                ravdess_codes[class],
                i % 2 + 1,
                i / 2 % 2 + 1,
                i / 4 + 1
            );
            write_named(&ravdess, &name, class, i)?;
            let name = format!("{:02}a0{}{}a.wav", 3 + i / 5, i % 5 + 1, emodb_letters[class]);
            write_named(&emodb, &name, class, i)?;
        }
    }
    Ok(CorpusRoots {
        ased: Some(ased),
        ased_sidecar: Some(sidecar),
        ravdess: Some(ravdess),
        emodb: Some(emodb),
    })
}

fn run_all(roots: &CorpusRoots, out: &Path) -> emoser::Result<Vec<ResultTable>> {
    let tables = ExperimentId::ALL
        .iter()
        .map(|&id| {
            let mut spec = ExperimentSpec::new(id, roots.clone(), out.to_path_buf());
            spec.model.epochs = 2;
            // small inputs keep this about reporting rather than training cost
            spec.feature_config.n_mels = 32;
            spec.feature_config.n_mfcc = 16;
            spec.feature_config.target_frames = 32;
            spec.cache_dir = Some(out.join("cache"));
            harness::run_experiment(&spec)
        })
        .collect::<emoser::Result<Vec<_>>>()?;
    harness::report(&tables, out)?;
    Ok(tables)
}

fn csv_files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    walkdir(dir)
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "csv") && !p.to_string_lossy().ends_with("_timing.csv"))
        .map(|p| (p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()))
        .collect()
}

fn walkdir(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walkdir(&p));
        } else {
            out.push(p);
        }
    }
    out
}

fn check_aggregates(csv: &str) -> Result<f64, String> {
    let (header, rows) = common::parse_table_csv(csv);
    let body: Vec<&Vec<String>> = rows
        .iter()
        .filter(|r| r.last().map(String::as_str) == Some("measured"))
        .collect();
    let avg = rows.iter().find(|r| r[0] == "Average").ok_or("no Average row")?;
    let sd = rows.iter().find(|r| r[0] == "St. Dev.").ok_or("no St. Dev. row")?;
    let mut worst: f64 = 0.0;
    for c in 1..header.len() - 1 {
        let vals: Vec<f64> = body.iter().filter_map(|r| r[c].parse().ok()).collect();
        let (m, s) = common::sample_stats(&vals);
        let got_m: f64 = avg[c].parse().map_err(|_| format!("bad Average cell '{}'", avg[c]))?;
        let got_s: f64 = sd[c].parse().map_err(|_| format!("bad St. Dev. cell '{}'", sd[c]))?;
        worst = worst.max((m - got_m).abs()).max((s - got_s).abs());
    }
    Ok(worst)
}

type Snapshot = BTreeMap<PathBuf, Vec<u8>>;

// 9. Aggregate rows and byte-identical reruns.
fn reporting_integrity() -> Outcome {
    let base = tempfile::tempdir().expect("tempdir");
    let run = || -> emoser::Result<(Snapshot, Snapshot)> {
        let roots = tiny_corpora(base.path())?;
        run_all(&roots, &base.path().join("run1"))?;
        run_all(&roots, &base.path().join("run2"))?;
        Ok((
            csv_files(&base.path().join("run1")),
            csv_files(&base.path().join("run2")),
        ))
    };
    let (a, b) = match run() {
        Ok(x) => x,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let mut worst: f64 = 0.0;
    let mut tables = 0;
    for (path, bytes) in &a {
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let is_table = ExperimentId::ALL.iter().any(|id| name == format!("{id}.csv"));
        let text = String::from_utf8_lossy(bytes);
        if is_table && text.contains("\nAverage,") {
            match check_aggregates(&text) {
                Ok(w) => worst = worst.max(w),
                Err(e) => return Outcome::Fail(format!("{name}: {e}")),
            }
            tables += 1;
        }
    }
    check(
        worst < 1e-9 && a == b && !a.is_empty() && tables == 4,
        format!(
            "{tables} aggregated tables, worst Average/St. Dev. deviation {worst:.1e} (tol 1e-9); {} CSVs {} across reruns",
            a.len(),
            if a == b { "byte-identical" } else { "DIFFER" }
        ),
    )
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "feature-oracle equivalence",
            limit: Duration::from_secs(60),
            run: feature_oracles,
        },
        Criterion {
            id: 2,
            name: "gradient suite",
            limit: Duration::from_secs(300),
            run: gradient_suite,
        },
        Criterion {
            id: 3,
            name: "Fleiss kappa",
            limit: Duration::from_secs(60),
            run: kappa_suite,
        },
        Criterion {
            id: 4,
            name: "split leakage",
            limit: Duration::from_secs(60),
            run: split_leakage,
        },
        Criterion {
            id: 5,
            name: "synthetic end-to-end",
            limit: Duration::from_secs(900),
            run: synthetic_end_to_end,
        },
        Criterion {
            id: 6,
            name: "ASED E1_1 reproduction",
            limit: Duration::from_secs(7200),
            run: ased_reproduction,
        },
        Criterion {
            id: 7,
            name: "EMO-DB reproduction",
            limit: Duration::from_secs(1800),
            run: emodb_reproduction,
        },
        Criterion {
            id: 8,
            name: "independence directionality",
            limit: Duration::from_secs(4 * 7200),
            run: independence_directionality,
        },
        Criterion {
            id: 9,
            name: "reporting integrity",
            limit: Duration::from_secs(600),
            run: reporting_integrity,
        },
    ];
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut unexpected = 0;
    for c in &criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&c.id)) {
            continue;
        }
        let started = Instant::now();
        let mut outcome = (c.run)();
        let took = started.elapsed();
        if took > c.limit {
            if let Outcome::Pass(d) = outcome {
                outcome = Outcome::Fail(format!("{d}; runtime over the {}s limit", c.limit.as_secs()));
            }
        }
        let (tag, detail) = match &outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => ("FAIL", d),
            Outcome::Skip(d) => ("SKIP", d),
        };
        let known = KNOWN_UNATTAINABLE.contains(&c.id);
        if matches!(outcome, Outcome::Fail(_)) && !known {
            unexpected += 1;
        }
        println!(
            "[{tag}] {}. {}: {detail} [{:.1}s, limit {}s]{}",
            c.id,
            c.name,
            took.as_secs_f64(),
            c.limit.as_secs(),
            if known && tag == "FAIL" {
                " (known unattainable)"
            } else {
                ""
            }
        );
    }
    if unexpected > 0 {
        eprintln!("{unexpected} acceptance criteria failed");
        std::process::exit(1);
    }
}
