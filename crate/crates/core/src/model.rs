//! The five classifier kinds behind one interface, and their versioned JSON
//! artifact format:
//!
//! ```text
//! {"kind": "tree", "version": 1, "config": {...}, "parameters": {...}, "provenance": {...}}
//! ```
//!
//! Floats are written in shortest round-trip decimal form, so a saved and
//! reloaded model scores bit-identically.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::baselines::{GnbModel, LogRegConfig, LogRegModel, MlpConfig, MlpModel, MlpParams, Node, TreeConfig, TreeModel};
use crate::bilstm::{BiLstmLayer, BiLstmNetwork, NetworkConfig, TrainConfig};
use crate::corpus::{SplitSpec, VulnClass};
use crate::embedding::EmbeddingModel;
use crate::error::{Error, Result};
use crate::lexer::TokenStream;
use crate::numerics::Matrix;
use crate::TOOLKIT_VERSION;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gnb,
    Tree,
    Logreg,
    Mlp,
    Bilstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [ModelKind::Gnb, ModelKind::Tree, ModelKind::Logreg, ModelKind::Mlp, ModelKind::Bilstm];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gnb => "gnb",
            ModelKind::Tree => "tree",
            ModelKind::Logreg => "logreg",
            ModelKind::Mlp => "mlp",
            ModelKind::Bilstm => "bilstm",
        }
    }

    /// Whether the model reads whole token sequences rather than a pooled
    /// feature vector.
    pub fn is_sequential(self) -> bool {
        self == ModelKind::Bilstm
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model kind {s:?}")))
    }
}

/// A BiLSTM network with the settings it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceClassifier {
    pub network: BiLstmNetwork,
    pub train: TrainConfig,
    /// Positions kept by [`EmbeddingModel::embed_sequence`].
    pub max_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedClassifier {
    Gnb(GnbModel),
    Tree(TreeModel),
    Logreg { model: LogRegModel, config: LogRegConfig },
    Mlp(MlpModel),
    Bilstm(SequenceClassifier),
}

#[derive(Serialize, Deserialize)]
struct TreeParameters {
    dim: usize,
    nodes: Vec<Node>,
}

#[derive(Serialize, Deserialize)]
struct MlpParameters {
    #[serde(flatten)]
    params: MlpParams,
    loss_curve: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BiLstmConfig {
    network: NetworkConfig,
    train: TrainConfig,
    max_len: usize,
}

#[derive(Serialize, Deserialize)]
struct BiLstmParameters {
    layers: Vec<BiLstmLayer>,
    w_out: Matrix,
    b_out: Matrix,
}

#[derive(Serialize, Deserialize)]
struct GnbConfig {
    var_smoothing: f64,
}

impl TrainedClassifier {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedClassifier::Gnb(_) => ModelKind::Gnb,
            TrainedClassifier::Tree(_) => ModelKind::Tree,
            TrainedClassifier::Logreg { .. } => ModelKind::Logreg,
            TrainedClassifier::Mlp(_) => ModelKind::Mlp,
            TrainedClassifier::Bilstm(_) => ModelKind::Bilstm,
        }
    }

    /// Embedding dimension the model was trained on.
    pub fn input_dim(&self) -> usize {
        match self {
            TrainedClassifier::Gnb(m) => m.dim(),
            TrainedClassifier::Tree(m) => m.dim,
            TrainedClassifier::Logreg { model, .. } => model.dim(),
            TrainedClassifier::Mlp(m) => m.dim(),
            TrainedClassifier::Bilstm(s) => s.network.config.input_dim,
        }
    }

    /// Scores a pooled feature vector. Fails for the sequence model.
    pub fn score_features(&self, x: &[f64]) -> Result<f64> {
        match self {
            TrainedClassifier::Gnb(m) => m.score(x),
            TrainedClassifier::Tree(m) => m.score(x),
            TrainedClassifier::Logreg { model, .. } => model.score(x),
            TrainedClassifier::Mlp(m) => m.score(x),
            TrainedClassifier::Bilstm(_) => Err(Error::InvalidArgument(
                "the bilstm model scores token sequences, not pooled features".into(),
            )),
        }
    }

    /// Scores a token stream: mean-pooled for the baselines, embedded as a
    /// sequence for the BiLSTM. The score lies in `[0, 1]`.
    pub fn score(&self, stream: &TokenStream, embedding: &EmbeddingModel) -> Result<f64> {
        if embedding.dim() != self.input_dim() {
            return Err(Error::Shape(format!(
                "embedding dim {} but the {} model expects {}",
                embedding.dim(),
                self.kind(),
                self.input_dim()
            )));
        }
        match self {
            TrainedClassifier::Bilstm(s) => {
                let seq = embedding.embed_sequence(stream, s.max_len);
                s.network.score(&seq.matrix, seq.valid_len)
            }
            _ => self.score_features(&embedding.pool_mean(stream)),
        }
    }

    /// Hyper-parameters as they appear in the artifact's `config` block.
    pub fn config_value(&self) -> Result<Value> {
        Ok(match self {
            TrainedClassifier::Gnb(m) => serde_json::to_value(GnbConfig {
                var_smoothing: crate::baselines::VAR_SMOOTHING,
            })
            .map(|mut v| {
                v["epsilon"] = json!(m.epsilon);
                v
            })?,
            TrainedClassifier::Tree(m) => serde_json::to_value(TreeConfig { max_depth: m.max_depth })?,
            TrainedClassifier::Logreg { config, .. } => serde_json::to_value(config)?,
            TrainedClassifier::Mlp(m) => serde_json::to_value(m.config)?,
            TrainedClassifier::Bilstm(s) => serde_json::to_value(BiLstmConfig {
                network: s.network.config,
                train: s.train,
                max_len: s.max_len,
            })?,
        })
    }

    fn parameters_value(&self) -> Result<Value> {
        Ok(match self {
            TrainedClassifier::Gnb(m) => json!({
                "priors": m.priors,
                "means": m.means,
                "variances": m.variances,
            }),
            TrainedClassifier::Tree(m) => serde_json::to_value(TreeParameters {
                dim: m.dim,
                nodes: m.nodes.clone(),
            })?,
            TrainedClassifier::Logreg { model, .. } => serde_json::to_value(model)?,
            TrainedClassifier::Mlp(m) => serde_json::to_value(MlpParameters {
                params: m.params.clone(),
                loss_curve: m.loss_curve.clone(),
            })?,
            TrainedClassifier::Bilstm(s) => serde_json::to_value(BiLstmParameters {
                layers: s.network.layers.clone(),
                w_out: s.network.w_out.clone(),
                b_out: s.network.b_out.clone(),
            })?,
        })
    }

    fn from_parts(kind: ModelKind, config: Value, parameters: Value) -> Result<Self> {
        let classifier = match kind {
            ModelKind::Gnb => {
                let epsilon = config["epsilon"]
                    .as_f64()
                    .ok_or_else(|| Error::Artifact("gnb config lacks epsilon".into()))?;
                #[derive(Deserialize)]
                struct P {
                    priors: [f64; 2],
                    means: Matrix,
                    variances: Matrix,
                }
                let p: P = block(parameters, "parameters")?;
                if p.means.shape() != p.variances.shape() || p.means.rows() != 2 {
                    return Err(Error::Artifact("gnb means and variances must both be 2 x dim".into()));
                }
                TrainedClassifier::Gnb(GnbModel {
                    priors: p.priors,
                    means: p.means,
                    variances: p.variances,
                    epsilon,
                })
            }
            ModelKind::Tree => {
                let c: TreeConfig = block(config, "config")?;
                let p: TreeParameters = block(parameters, "parameters")?;
                let tree = TreeModel {
                    nodes: p.nodes,
                    max_depth: c.max_depth,
                    dim: p.dim,
                };
                tree.validate().map_err(|e| Error::Artifact(e.to_string()))?;
                TrainedClassifier::Tree(tree)
            }
            ModelKind::Logreg => TrainedClassifier::Logreg {
                config: block(config, "config")?,
                model: block(parameters, "parameters")?,
            },
            ModelKind::Mlp => {
                let c: MlpConfig = block(config, "config")?;
                let p: MlpParameters = block(parameters, "parameters")?;
                let (d, h) = p.params.w1.shape();
                if h != c.hidden || p.params.b1.shape() != (1, h) || p.params.w2.shape() != (h, 1) || p.params.b2.shape() != (1, 1) {
                    return Err(Error::Artifact(format!("mlp weights do not match a {d} x {} network", c.hidden)));
                }
                TrainedClassifier::Mlp(MlpModel {
                    params: p.params,
                    config: c,
                    loss_curve: p.loss_curve,
                })
            }
            ModelKind::Bilstm => {
                let c: BiLstmConfig = block(config, "config")?;
                let p: BiLstmParameters = block(parameters, "parameters")?;
                let network = BiLstmNetwork {
                    config: c.network,
                    layers: p.layers,
                    w_out: p.w_out,
                    b_out: p.b_out,
                };
                network.validate().map_err(|e| Error::Artifact(e.to_string()))?;
                TrainedClassifier::Bilstm(SequenceClassifier {
                    network,
                    train: c.train,
                    max_len: c.max_len,
                })
            }
        };
        if let Some(bad) = classifier.non_finite_block() {
            return Err(Error::Artifact(format!("non-finite value in {bad}")));
        }
        Ok(classifier)
    }

    fn non_finite_block(&self) -> Option<&'static str> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match self {
            TrainedClassifier::Gnb(m) => (!(finite(&m.priors) && m.means.is_finite() && m.variances.is_finite())).then_some("gnb parameters"),
            TrainedClassifier::Tree(m) => m
                .nodes
                .iter()
                .any(|n| match n {
                    Node::Split { threshold, .. } => !threshold.is_finite(),
                    Node::Leaf { value, .. } => !value.is_finite(),
                })
                .then_some("tree nodes"),
            TrainedClassifier::Logreg { model, .. } => (!(finite(&model.weights) && model.bias.is_finite())).then_some("logreg weights"),
            TrainedClassifier::Mlp(m) => (!m.params.w1.is_finite() || !m.params.b1.is_finite() || !m.params.w2.is_finite() || !m.params.b2.is_finite())
                .then_some("mlp weights"),
            TrainedClassifier::Bilstm(_) => None,
        }
    }
}

fn block<T: DeserializeOwned>(value: Value, name: &str) -> Result<T> {
    serde_json::from_value(value).map_err(|e| Error::Artifact(format!("{name}: {e}")))
}

/// Where an artifact came from. Every artifact the toolkit writes carries
/// one; `evaluate` compares them to refuse mismatched chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub toolkit_version: String,
    pub seed: u64,
    /// [`config_digest`] of the artifact's own configuration.
    pub config_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vuln_class: Option<VulnClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSpec>,
    /// SHA-256 of the dataset file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_sha256: Option<String>,
    /// SHA-256 of the embedding file the model was trained against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_sha256: Option<String>,
}

impl Provenance {
    pub fn new(seed: u64, config: &impl Serialize) -> Result<Self> {
        Ok(Provenance {
            toolkit_version: TOOLKIT_VERSION.to_string(),
            seed,
            config_digest: config_digest(config)?,
            vuln_class: None,
            split: None,
            dataset_sha256: None,
            embedding_sha256: None,
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// First 16 hex digits of the SHA-256 of the compact JSON form of `config`
/// with object keys sorted.
pub fn config_digest(config: &impl Serialize) -> Result<String> {
    // `Value` keeps object keys in a BTreeMap, which sorts them.
    let canonical = serde_json::to_string(&serde_json::to_value(config)?)?;
    Ok(sha256_hex(canonical.as_bytes())[..16].to_string())
}

/// A classifier together with its provenance: the unit that is saved and
/// loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub classifier: TrainedClassifier,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    kind: ModelKind,
    version: u32,
    config: Value,
    parameters: Value,
    provenance: Provenance,
}

impl ModelArtifact {
    pub fn to_json(&self) -> Result<String> {
        let envelope = Envelope {
            kind: self.classifier.kind(),
            version: FORMAT_VERSION,
            config: self.classifier.config_value()?,
            parameters: self.classifier.parameters_value()?,
            provenance: self.provenance.clone(),
        };
        Ok(serde_json::to_string_pretty(&envelope)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let envelope: Envelope = serde_json::from_str(text).map_err(|e| Error::Artifact(e.to_string()))?;
        if envelope.version != FORMAT_VERSION {
            return Err(Error::Artifact(format!(
                "model format version {} is not supported (expected {FORMAT_VERSION})",
                envelope.version
            )));
        }
        let classifier = TrainedClassifier::from_parts(envelope.kind, envelope.config, envelope.parameters)?;
        Ok(ModelArtifact {
            classifier,
            provenance: envelope.provenance,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
