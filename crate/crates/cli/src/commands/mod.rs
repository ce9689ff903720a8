pub mod embed;
pub mod evaluate;
pub mod scan;
pub mod tokenize;
pub mod train;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use vulnlex::corpus::{load_dataset, LabeledSample, SplitSpec, VulnClass};
use vulnlex::embedding::{read_text, EmbeddingModel};
use vulnlex::model::ModelKind;

use crate::config::ConfigFile;

pub fn load_samples(path: &Path) -> Result<Vec<LabeledSample>> {
    let samples = load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))?;
    if samples.is_empty() {
        bail!("empty corpus: {} holds no samples", path.display());
    }
    Ok(samples)
}

pub fn samples_of(samples: Vec<LabeledSample>, class: VulnClass) -> Result<Vec<LabeledSample>> {
    let kept: Vec<_> = samples.into_iter().filter(|s| s.vuln_class == class).collect();
    if kept.is_empty() {
        bail!("the dataset holds no {class} samples");
    }
    Ok(kept)
}

pub fn load_embedding(path: &Path) -> Result<EmbeddingModel> {
    read_text(path).with_context(|| format!("loading embedding {}", path.display()))
}

/// Split fractions from the `[split]` section, seeded with `seed`.
pub fn split_spec(config: &ConfigFile, seed: u64) -> Result<SplitSpec> {
    let mut spec = SplitSpec::with_seed(seed);
    if let Some(f) = config.get("split", "train")? {
        spec.train_fraction = f;
    }
    if let Some(f) = config.get("split", "test")? {
        spec.test_fraction = f;
    }
    if let Some(f) = config.get("split", "validation")? {
        spec.validation_fraction = f;
    }
    spec.validate()?;
    Ok(spec)
}

pub fn out_dir(flag: Option<PathBuf>, config: &ConfigFile) -> PathBuf {
    flag.or_else(|| config.path("out")).unwrap_or_else(|| PathBuf::from("."))
}

pub fn model_file(out: &Path, class: VulnClass, kind: ModelKind) -> PathBuf {
    out.join(format!("model-{class}-{kind}.json"))
}

pub fn history_file(out: &Path, class: VulnClass, kind: ModelKind) -> PathBuf {
    out.join(format!("history-{class}-{kind}.json"))
}
