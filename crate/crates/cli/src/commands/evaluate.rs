use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use vulnlex::corpus::{split, Partition, VulnClass};
use vulnlex::evaluation::{render_text, roc_csv, EvaluationReport, DEFAULT_THRESHOLD};
use vulnlex::lexer::tokenize_with_id;
use vulnlex::model::{file_sha256, ModelArtifact};
use vulnlex::TOOLKIT_VERSION;

use super::{load_embedding, load_samples, out_dir, samples_of, split_spec};
use crate::config::{pick, requested_seed, required_path, ConfigFile};
use crate::output::Outputs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PartitionChoice {
    Test,
    Validation,
    Both,
}

impl PartitionChoice {
    fn partitions(self) -> Vec<Partition> {
        match self {
            PartitionChoice::Test => vec![Partition::Test],
            PartitionChoice::Validation => vec![Partition::Validation],
            PartitionChoice::Both => vec![Partition::Test, Partition::Validation],
        }
    }
}

impl std::str::FromStr for PartitionChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, false)
    }
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Model file written by `vulnlex train`
    #[arg(long)]
    model: PathBuf,
    /// The dataset the model was trained on
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// The embedding file the model was trained with
    #[arg(long)]
    embedding: Option<PathBuf>,
    /// Partition(s) to evaluate [default: both]
    #[arg(long, value_enum)]
    partition: Option<PartitionChoice>,
    /// Scores at or above this are labeled vulnerable
    #[arg(long)]
    threshold: Option<f64>,
    /// Must match the seed recorded in the model, if given
    #[arg(long)]
    seed: Option<u64>,
    /// Must match the class recorded in the model, if given
    #[arg(long)]
    class: Option<VulnClass>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: EvaluateArgs, config: &ConfigFile) -> Result<ExitCode> {
    let dataset = required_path(args.dataset.clone(), config, "dataset", "--dataset")?;
    let embedding_path = required_path(args.embedding.clone(), config, "embedding", "--embedding")?;
    let partition = pick(args.partition, config, "", "partition")?.unwrap_or(PartitionChoice::Both);
    let threshold = pick(args.threshold, config, "", "threshold")?.unwrap_or(DEFAULT_THRESHOLD);
    let out = out_dir(args.out.clone(), config);

    let artifact =
        ModelArtifact::load(&args.model).with_context(|| format!("loading model {}", args.model.display()))?;
    let recorded = &artifact.provenance;
    let kind = artifact.classifier.kind();

    // Refuse artifact chains that do not line up.
    let Some(class) = recorded.vuln_class else {
        bail!("model {} does not record its vulnerability class", args.model.display());
    };
    if let Some(requested) = pick(args.class, config, "", "class")? {
        if requested != class {
            bail!("model was trained for {class}, not {requested}");
        }
    }
    if let Some(seed) = requested_seed(args.seed, config)? {
        if seed != recorded.seed {
            bail!("seed mismatch: model was trained with seed {}, request uses {seed}", recorded.seed);
        }
    }
    let Some(spec) = recorded.split else {
        bail!("model {} does not record its split", args.model.display());
    };
    let split_configured = ["train", "test", "validation"]
        .iter()
        .map(|k| config.get::<f64>("split", k).map(|v| v.is_some()))
        .collect::<Result<Vec<bool>>>()?
        .contains(&true);
    let configured = split_spec(config, spec.seed)?;
    if split_configured && configured != spec {
        bail!("split mismatch: model recorded {spec:?}, config asks for {configured:?}");
    }
    if let Some(want) = &recorded.embedding_sha256 {
        if *want != file_sha256(&embedding_path)? {
            bail!("{} is not the embedding the model was trained with", embedding_path.display());
        }
    }
    if let Some(want) = &recorded.dataset_sha256 {
        if *want != file_sha256(&dataset)? {
            bail!("{} is not the dataset the model was trained on", dataset.display());
        }
    }
    if recorded.toolkit_version != TOOLKIT_VERSION {
        eprintln!(
            "warning: model written by toolkit {}, this is {TOOLKIT_VERSION}",
            recorded.toolkit_version
        );
    }

    let samples = samples_of(load_samples(&dataset)?, class)?;
    let embedding = load_embedding(&embedding_path)?;
    let parts = split(&samples, &spec)?;

    let mut reports = Vec::new();
    let mut outputs = Outputs::new();
    for p in partition.partitions() {
        let subset = parts.partition(&p);
        let scores = subset
            .iter()
            .map(|s| artifact.classifier.score(&tokenize_with_id(&s.code, s.id.clone()), &embedding))
            .collect::<vulnlex::Result<Vec<f64>>>()?;
        let labels: Vec<u8> = subset.iter().map(|s| s.label).collect();
        let mut report = EvaluationReport::from_scores(class, kind, p.clone(), &scores, &labels, threshold)
            .with_context(|| format!("evaluating the {p} partition"))?;
        report.provenance = Some(recorded.clone());

        let stem = format!("report-{class}-{kind}-{p}");
        outputs.write(&out.join(format!("{stem}.json")), serde_json::to_string_pretty(&report)? + "\n")?;
        outputs.write(&out.join(format!("{stem}.txt")), render_text(std::slice::from_ref(&report), None))?;
        if let Some(curve) = &report.roc {
            outputs.write(&out.join(format!("roc-{class}-{kind}-{p}.csv")), roc_csv(curve))?;
        }
        reports.push(report);
    }
    let written = outputs.commit();
    print!("{}", render_text(&reports, None));
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}
