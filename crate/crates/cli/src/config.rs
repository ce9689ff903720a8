//! INI configuration files.
//!
//! ```ini
//! seed = 7
//! dataset = data/train.jsonl
//! class = xss
//! model = bilstm
//! embedding = out/embedding.txt
//! out = out
//!
//! [embedding]
//! dim = 300
//! min_count = 10
//! iterations = 200
//!
//! [bilstm]
//! epochs = 50
//! ```
//!
//! Relative paths are resolved against the directory holding the file.
//! Command-line flags take precedence over the file; the seed falls back to
//! `VULNLEX_SEED` and then to 1.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use ini::Ini;

/// Keys accepted in each section; anything else is rejected so typos do not
/// pass silently.
const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("", &["seed", "dataset", "class", "model", "embedding", "out", "threshold", "partition"]),
    ("embedding", &["dim", "min_count", "iterations", "window", "negatives", "learning_rate"]),
    ("split", &["train", "test", "validation"]),
    ("tree", &["max_depth"]),
    ("logreg", &["c", "tolerance", "max_iterations"]),
    ("mlp", &["hidden", "learning_rate", "alpha", "batch_size", "max_epochs"]),
    ("bilstm", &["hidden", "layers", "epochs", "batch_size", "dropout", "learning_rate", "max_len"]),
];

pub const SEED_ENV: &str = "VULNLEX_SEED";
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Default)]
pub struct ConfigFile {
    ini: Ini,
    base: PathBuf,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let ini = Ini::load_from_file(path).with_context(|| format!("reading config {}", path.display()))?;
        for (section, props) in ini.iter() {
            let name = section.unwrap_or("");
            let keys = KNOWN_KEYS
                .iter()
                .find(|(s, _)| *s == name)
                .map(|(_, k)| *k)
                .ok_or_else(|| anyhow!("{}: unknown section [{name}]", path.display()))?;
            for (key, _) in props.iter() {
                if !keys.contains(&key) {
                    let shown = if name.is_empty() { key.to_string() } else { format!("{name}.{key}") };
                    bail!("{}: unknown key {shown:?}", path.display());
                }
            }
        }
        Ok(ConfigFile {
            ini,
            base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        let section = (!section.is_empty()).then_some(section);
        self.ini.section(section).and_then(|p| p.get(key))
    }

    /// Parses `section.key` (use `""` for top-level keys).
    pub fn get<T>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.raw(section, key)
            .map(|v| {
                v.trim().parse::<T>().map_err(|e| {
                    let shown = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
                    anyhow!("config value {shown} = {v:?}: {e}")
                })
            })
            .transpose()
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw("", key).map(|v| self.base.join(v.trim()))
    }
}

/// `flag`, else the config value, else `None`.
pub fn pick<T>(flag: Option<T>, config: &ConfigFile, section: &str, key: &str) -> Result<Option<T>>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => config.get(section, key),
    }
}

/// Seed from the flag, the config file or `VULNLEX_SEED`, if any was given.
pub fn requested_seed(flag: Option<u64>, config: &ConfigFile) -> Result<Option<u64>> {
    if let Some(seed) = pick(flag, config, "", "seed")? {
        return Ok(Some(seed));
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|e| anyhow!("{SEED_ENV}={v:?}: {e}")),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(anyhow!("{SEED_ENV}: {e}")),
    }
}

pub fn resolve_seed(flag: Option<u64>, config: &ConfigFile) -> Result<u64> {
    Ok(requested_seed(flag, config)?.unwrap_or(DEFAULT_SEED))
}

pub fn required_path(flag: Option<PathBuf>, config: &ConfigFile, key: &str, flag_name: &str) -> Result<PathBuf> {
    flag.or_else(|| config.path(key))
        .ok_or_else(|| anyhow!("missing {flag_name} (or `{key}` in the config file)"))
}
