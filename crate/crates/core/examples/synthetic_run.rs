//! Trains VGGb on the synthetic five-class corpus and prints per-epoch curves.
//!
//! Usage: `cargo run --release --example synthetic_run -- [epochs] [seed]`

use emoser::corpus::{build_manifest, CorpusKind};
use emoser::features::{FeatureConfig, FeatureExtractor, FeatureKind};
use emoser::harness::{load_features, run_cell, synthetic};
use emoser::splits::random_split;
use emoser::vggb::VggbConfig;

fn main() -> emoser::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let epochs = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let dir = std::env::temp_dir().join(format!("emoser-synthetic-{seed}"));
    synthetic::write_corpus(&dir, 100, 2.0, 22050, seed)?;
    let manifest = build_manifest(&dir, CorpusKind::Ased, None)?;
    let extractor = FeatureExtractor::new(FeatureConfig::default())?;
    let feats = load_features(&manifest, FeatureKind::Mfcc, &extractor, None)?;
    let plan = random_split(&manifest, 0.10, seed, false)?;
    let cfg = VggbConfig {
        epochs,
        ..VggbConfig::default()
    };
    let cell = run_cell(&manifest, &feats, &plan, 0, &cfg, &[seed])?;
    if let Some(curve) = &cell.curve {
        print!("{}", curve.to_csv());
    }
    println!("accuracy {:?} in {:.1}s", cell.accuracy, cell.wall_clock_secs);
    Ok(())
}
