use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::Args;
use serde::Serialize;
use vulnlex::baselines::{GnbModel, LogRegConfig, LogRegModel, MlpConfig, MlpModel, TreeConfig, TreeModel};
use vulnlex::bilstm::{self, BiLstmNetwork, Example, NetworkConfig, TrainConfig};
use vulnlex::corpus::{split, LabeledSample, Partition, VulnClass};
use vulnlex::embedding::{EmbeddingModel, DEFAULT_MAX_LEN};
use vulnlex::evaluation::{EvaluationReport, DEFAULT_THRESHOLD};
use vulnlex::lexer::tokenize_with_id;
use vulnlex::model::{file_sha256, ModelArtifact, ModelKind, Provenance, SequenceClassifier, TrainedClassifier};
use vulnlex::numerics::{AdamConfig, Matrix, Rng};

use super::{history_file, load_embedding, load_samples, model_file, out_dir, samples_of, split_spec};
use crate::config::{pick, required_path, resolve_seed, ConfigFile};
use crate::output::Outputs;

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// JSON Lines dataset
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Vulnerability class to detect
    #[arg(long)]
    class: Option<VulnClass>,
    /// Model kind: gnb, tree, logreg, mlp or bilstm
    #[arg(long)]
    model: Option<ModelKind>,
    /// Embedding file written by `vulnlex embed`
    #[arg(long)]
    embedding: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (default: config file, then VULNLEX_SEED, then 1)
    #[arg(long)]
    seed: Option<u64>,
    /// Tree depth limit (default: 2 for xss and open_redirect, else 5)
    #[arg(long)]
    max_depth: Option<usize>,
    /// Hidden units (mlp) or units per direction (bilstm)
    #[arg(long)]
    hidden: Option<usize>,
    /// Stacked BiLSTM layers
    #[arg(long)]
    layers: Option<usize>,
    /// Training epochs (bilstm) or epoch cap (mlp)
    #[arg(long)]
    epochs: Option<usize>,
    /// Minibatch size (mlp, bilstm)
    #[arg(long)]
    batch_size: Option<usize>,
    /// Step size (mlp, bilstm)
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Tokens kept per snippet by the bilstm
    #[arg(long)]
    max_len: Option<usize>,
}

#[derive(Serialize)]
struct LossRecord {
    epoch: usize,
    loss: f64,
}

fn pooled(samples: &[LabeledSample], embedding: &EmbeddingModel) -> Result<(Matrix, Vec<u8>)> {
    let rows: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| embedding.pool_mean(&tokenize_with_id(&s.code, s.id.clone())))
        .collect();
    Ok((Matrix::from_rows(&rows)?, samples.iter().map(|s| s.label).collect()))
}

fn sequences(samples: &[LabeledSample], embedding: &EmbeddingModel, max_len: usize) -> Vec<Example> {
    samples
        .iter()
        .map(|s| Example {
            sequence: embedding.embed_sequence(&tokenize_with_id(&s.code, s.id.clone()), max_len),
            label: s.label,
        })
        .collect()
}

/// Trains the requested model; returns it with its history file contents,
/// if the model kind keeps one.
#[allow(clippy::too_many_arguments)]
fn fit(
    args: &TrainArgs,
    config: &ConfigFile,
    kind: ModelKind,
    class: VulnClass,
    seed: u64,
    train: &[LabeledSample],
    validation: &[LabeledSample],
    embedding: &EmbeddingModel,
) -> Result<(TrainedClassifier, Option<String>)> {
    if kind == ModelKind::Bilstm {
        let defaults = TrainConfig::default();
        let max_len = pick(args.max_len, config, "bilstm", "max_len")?.unwrap_or(DEFAULT_MAX_LEN);
        let mut network_config = NetworkConfig::new(embedding.dim());
        network_config.hidden = pick(args.hidden, config, "bilstm", "hidden")?.unwrap_or(network_config.hidden);
        network_config.layers = pick(args.layers, config, "bilstm", "layers")?.unwrap_or(network_config.layers);
        let train_config = TrainConfig {
            epochs: pick(args.epochs, config, "bilstm", "epochs")?.unwrap_or(defaults.epochs),
            batch_size: pick(args.batch_size, config, "bilstm", "batch_size")?.unwrap_or(defaults.batch_size),
            dropout_rate: config.get("bilstm", "dropout")?.unwrap_or(defaults.dropout_rate),
            adam: AdamConfig {
                learning_rate: pick(args.learning_rate, config, "bilstm", "learning_rate")?
                    .unwrap_or(defaults.adam.learning_rate),
                ..defaults.adam
            },
            clip_norm: None,
            seed,
        };
        let network = BiLstmNetwork::new(network_config, &mut Rng::new(seed))?;
        let (network, history) = bilstm::fit(
            network,
            &sequences(train, embedding, max_len),
            &sequences(validation, embedding, max_len),
            &train_config,
        )?;
        let classifier = TrainedClassifier::Bilstm(SequenceClassifier {
            network,
            train: train_config,
            max_len,
        });
        return Ok((classifier, Some(serde_json::to_string_pretty(&history)? + "\n")));
    }

    let (x, y) = pooled(train, embedding)?;
    Ok(match kind {
        ModelKind::Gnb => (TrainedClassifier::Gnb(GnbModel::fit(&x, &y)?), None),
        ModelKind::Tree => {
            let max_depth = pick(args.max_depth, config, "tree", "max_depth")?.unwrap_or(class.default_tree_depth());
            (TrainedClassifier::Tree(TreeModel::fit(&x, &y, TreeConfig { max_depth })?), None)
        }
        ModelKind::Logreg => {
            let d = LogRegConfig::default();
            let lr_config = LogRegConfig {
                c: config.get("logreg", "c")?.unwrap_or(d.c),
                tolerance: config.get("logreg", "tolerance")?.unwrap_or(d.tolerance),
                max_iterations: config.get("logreg", "max_iterations")?.unwrap_or(d.max_iterations),
                ..d
            };
            let model = LogRegModel::fit(&x, &y, &lr_config)?;
            (TrainedClassifier::Logreg { model, config: lr_config }, None)
        }
        ModelKind::Mlp => {
            let d = MlpConfig::default();
            let mlp_config = MlpConfig {
                hidden: pick(args.hidden, config, "mlp", "hidden")?.unwrap_or(d.hidden),
                learning_rate: pick(args.learning_rate, config, "mlp", "learning_rate")?.unwrap_or(d.learning_rate),
                alpha: config.get("mlp", "alpha")?.unwrap_or(d.alpha),
                batch_size: pick(args.batch_size, config, "mlp", "batch_size")?.unwrap_or(d.batch_size),
                max_epochs: pick(args.epochs, config, "mlp", "max_epochs")?.unwrap_or(d.max_epochs),
                seed,
                ..d
            };
            let model = MlpModel::fit(&x, &y, &mlp_config)?;
            let history: Vec<LossRecord> = model
                .loss_curve
                .iter()
                .enumerate()
                .map(|(i, &loss)| LossRecord { epoch: i + 1, loss })
                .collect();
            let text = serde_json::to_string_pretty(&history)? + "\n";
            (TrainedClassifier::Mlp(model), Some(text))
        }
        ModelKind::Bilstm => unreachable!("handled above"),
    })
}

pub fn run(args: TrainArgs, config: &ConfigFile) -> Result<ExitCode> {
    let dataset = required_path(args.dataset.clone(), config, "dataset", "--dataset")?;
    let embedding_path = required_path(args.embedding.clone(), config, "embedding", "--embedding")?;
    let class = pick(args.class, config, "", "class")?.ok_or_else(|| anyhow!("missing --class"))?;
    let kind = pick(args.model, config, "", "model")?.ok_or_else(|| anyhow!("missing --model"))?;
    let seed = resolve_seed(args.seed, config)?;
    let spec = split_spec(config, seed)?;
    let out = out_dir(args.out.clone(), config);

    let samples = samples_of(load_samples(&dataset)?, class)?;
    let embedding = load_embedding(&embedding_path)?;
    let parts = split(&samples, &spec)?;

    let (classifier, history) = fit(&args, config, kind, class, seed, &parts.train, &parts.validation, &embedding)
        .with_context(|| format!("training {kind} for {class}"))?;

    let mut provenance = Provenance::new(seed, &classifier.config_value()?)?;
    provenance.vuln_class = Some(class);
    provenance.split = Some(spec);
    provenance.dataset_sha256 = Some(file_sha256(&dataset)?);
    provenance.embedding_sha256 = Some(file_sha256(&embedding_path)?);
    let artifact = ModelArtifact { classifier, provenance };

    let scores = parts
        .train
        .iter()
        .map(|s| artifact.classifier.score(&tokenize_with_id(&s.code, s.id.clone()), &embedding))
        .collect::<vulnlex::Result<Vec<f64>>>()?;
    let labels: Vec<u8> = parts.train.iter().map(|s| s.label).collect();
    let report = EvaluationReport::from_scores(class, kind, Partition::Train, &scores, &labels, DEFAULT_THRESHOLD)?;

    let mut outputs = Outputs::new();
    let model_path = model_file(&out, class, kind);
    outputs.write(&model_path, artifact.to_json()?)?;
    if let Some(history) = history {
        outputs.write(&history_file(&out, class, kind), history)?;
    }
    for path in outputs.commit() {
        println!("wrote {}", path.display());
    }
    println!(
        "{kind} on {class}: {} training samples, train accuracy {:.4}, train f_score {:.4}",
        parts.train.len(),
        report.metrics.accuracy,
        report.metrics.f_score
    );
    Ok(ExitCode::SUCCESS)
}
