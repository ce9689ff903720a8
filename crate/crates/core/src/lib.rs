//! Lexical vulnerability detection for Python source code.
//!
//! The pipeline runs in five stages, each in its own module:
//!
//! * [`corpus`]: labeled snippets, the JSON Lines dataset format and
//!   stratified train/test/validation splits.
//! * [`lexer`]: an indentation-aware Python tokenizer that normalizes
//!   literals and drops comments.
//! * [`embedding`]: skip-gram word2vec with negative sampling over token
//!   streams, plus sequence embedding and mean pooling.
//! * [`baselines`] and [`bilstm`]: Gaussian naive Bayes, a Gini decision
//!   tree, L2 logistic regression, a one-hidden-layer MLP and a stacked
//!   bidirectional LSTM trained by backpropagation through time.
//! * [`evaluation`]: confusion counts, ROC/AUC and macro-averaged reports.
//!
//! [`numerics`] holds the dense linear algebra, Adam, the seeded RNG and the
//! finite-difference gradient checker shared by every learned model, and
//! [`model`] wraps all five classifiers in one versioned JSON envelope.

pub mod baselines;
pub mod bilstm;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod lexer;
pub mod model;
pub mod numerics;

pub use corpus::{DatasetSplit, LabeledSample, SplitSpec, VulnClass};
pub use embedding::{EmbeddingModel, Word2vecConfig};
pub use error::{Error, Result};
pub use evaluation::{ConfusionCounts, EvaluationReport, RocCurve};
pub use lexer::{Token, TokenKind, TokenStream};
pub use model::{ModelArtifact, ModelKind, TrainedClassifier};
pub use numerics::{Matrix, Rng};

/// Version string embedded in every artifact this crate writes.
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
