use std::collections::BTreeMap;
use std::path::Path;

use emoser::{Error, Result};

/// Keys accepted in a `key=value` config file. Dashes and underscores are
/// interchangeable.
pub const KEYS: &[&str] = &[
    "root",
    "sidecar",
    "corpus",
    "seed",
    "epochs",
    "batch_size",
    "feature",
    "out",
    "ravdess",
    "emodb",
    "cache",
    "threads",
    "seeds_per_row",
    "population_sd",
];

/// Parses `key=value` lines; `#` starts a comment, blank lines are ignored.
pub fn parse(text: &str, source: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("{source}:{}: expected key=value", no + 1)));
        };
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "{source}:{}: unknown key '{}'",
                no + 1,
                k.trim()
            )));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

pub fn load(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, &path.display().to_string())
}
