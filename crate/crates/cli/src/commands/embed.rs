use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::Args;
use vulnlex::corpus::VulnClass;
use vulnlex::embedding::{self, render_text, sidecar, sidecar_path, Word2vecConfig};
use vulnlex::lexer::{tokenize_with_id, TokenStream};

use super::{load_samples, out_dir};
use crate::config::{pick, required_path, resolve_seed, ConfigFile};
use crate::output::Outputs;

pub const EMBEDDING_FILE: &str = "embedding.txt";

#[derive(Args, Debug)]
pub struct EmbedArgs {
    /// JSON Lines dataset
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Train on this class only (default: every sample)
    #[arg(long)]
    class: Option<VulnClass>,
    /// Output directory; receives embedding.txt and embedding.json
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (default: config file, then VULNLEX_SEED, then 1)
    #[arg(long)]
    seed: Option<u64>,
    /// Vector dimension
    #[arg(long)]
    dim: Option<usize>,
    /// Drop lexemes seen fewer times than this
    #[arg(long)]
    min_count: Option<u64>,
    /// Passes over the corpus
    #[arg(long)]
    iterations: Option<usize>,
    /// Context window radius
    #[arg(long)]
    window: Option<usize>,
    /// Negative samples per positive pair
    #[arg(long)]
    negatives: Option<usize>,
}

pub fn word2vec_config(args: &EmbedArgs, config: &ConfigFile, seed: u64) -> Result<Word2vecConfig> {
    let d = Word2vecConfig::default();
    Ok(Word2vecConfig {
        vector_dim: pick(args.dim, config, "embedding", "dim")?.unwrap_or(d.vector_dim),
        min_count: pick(args.min_count, config, "embedding", "min_count")?.unwrap_or(d.min_count),
        iterations: pick(args.iterations, config, "embedding", "iterations")?.unwrap_or(d.iterations),
        window: pick(args.window, config, "embedding", "window")?.unwrap_or(d.window),
        negatives_per_positive: pick(args.negatives, config, "embedding", "negatives")?.unwrap_or(d.negatives_per_positive),
        initial_learning_rate: config.get("embedding", "learning_rate")?.unwrap_or(d.initial_learning_rate),
        seed,
    })
}

pub fn run(args: EmbedArgs, config: &ConfigFile) -> Result<ExitCode> {
    let dataset = required_path(args.dataset.clone(), config, "dataset", "--dataset")?;
    let seed = resolve_seed(args.seed, config)?;
    let w2v = word2vec_config(&args, config, seed)?;
    let class = pick(args.class, config, "", "class")?;
    let out = out_dir(args.out.clone(), config);

    let samples = load_samples(&dataset)?;
    let streams: Vec<TokenStream> = samples
        .iter()
        .filter(|s| class.map_or(true, |c| s.vuln_class == c))
        .map(|s| tokenize_with_id(&s.code, s.id.clone()))
        .collect();
    if streams.is_empty() {
        anyhow::bail!("empty corpus: no samples of the requested class");
    }
    let model = embedding::train(&streams, &w2v)?;

    let path = out.join(EMBEDDING_FILE);
    let mut outputs = Outputs::new();
    outputs.write(&path, render_text(&model))?;
    outputs.write(&sidecar_path(&path), serde_json::to_string_pretty(&sidecar(&model)?)? + "\n")?;
    outputs.commit();

    println!("vocabulary size: {}", model.vocab.len());
    match model.epoch_losses.last() {
        Some(loss) => println!("final average loss: {loss:.6}"),
        None => println!("final average loss: n/a (no iterations)"),
    }
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}
