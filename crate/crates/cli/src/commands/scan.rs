use std::cmp::Ordering;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Args;
use vulnlex::bilstm::label_for;
use vulnlex::evaluation::DEFAULT_THRESHOLD;
use vulnlex::lexer::tokenize_bytes;
use vulnlex::model::{file_sha256, ModelArtifact};
use walkdir::WalkDir;

use super::load_embedding;
use crate::config::{pick, required_path, ConfigFile};

#[derive(Args, Debug)]
pub struct ScanArgs {
    /// Model file written by `vulnlex train`
    #[arg(long)]
    model: PathBuf,
    /// The embedding file the model was trained with
    #[arg(long)]
    embedding: Option<PathBuf>,
    /// Scores at or above this are findings
    #[arg(long)]
    threshold: Option<f64>,
    /// Files or directories; directories are searched for `*.py`
    #[arg(required = true)]
    paths: Vec<PathBuf>,
}

/// Explicit files are taken as given; directories contribute their `.py`
/// files in sorted order.
fn targets(paths: &[PathBuf], skipped: &mut Vec<(PathBuf, String)>) -> Vec<PathBuf> {
    let mut files = Vec::new();
    for path in paths {
        if !path.is_dir() {
            files.push(path.clone());
            continue;
        }
        for entry in WalkDir::new(path).sort_by_file_name() {
            match entry {
                Ok(e) if e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "py") => {
                    files.push(e.into_path())
                }
                Ok(_) => {}
                Err(e) => skipped.push((e.path().map(PathBuf::from).unwrap_or_else(|| path.clone()), e.to_string())),
            }
        }
    }
    files
}

pub fn run(args: ScanArgs, config: &ConfigFile) -> Result<ExitCode> {
    let embedding_path = required_path(args.embedding.clone(), config, "embedding", "--embedding")?;
    let threshold = pick(args.threshold, config, "", "threshold")?.unwrap_or(DEFAULT_THRESHOLD);
    let artifact =
        ModelArtifact::load(&args.model).with_context(|| format!("loading model {}", args.model.display()))?;
    if let Some(want) = &artifact.provenance.embedding_sha256 {
        if *want != file_sha256(&embedding_path)? {
            bail!("{} is not the embedding the model was trained with", embedding_path.display());
        }
    }
    let embedding = load_embedding(&embedding_path)?;

    let mut skipped = Vec::new();
    let mut results: Vec<(PathBuf, f64)> = Vec::new();
    for file in targets(&args.paths, &mut skipped) {
        let scored = fs::read(&file)
            .map_err(|e| e.to_string())
            .and_then(|bytes| tokenize_bytes(&bytes).map_err(|e| e.to_string()))
            .and_then(|stream| artifact.classifier.score(&stream, &embedding).map_err(|e| e.to_string()));
        match scored {
            Ok(score) => results.push((file, score)),
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", file.display());
                skipped.push((file, e));
            }
        }
    }
    results.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(&b.0)));

    let mut findings = 0;
    for (path, score) in &results {
        let label = label_for(*score, threshold);
        findings += label as usize;
        println!("{} {score:.6} {label}", path.display());
    }
    eprintln!(
        "scanned {} files: {findings} findings, {} skipped",
        results.len(),
        skipped.len()
    );
    Ok(if findings > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
}
