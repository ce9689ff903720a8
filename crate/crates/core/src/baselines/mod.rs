//! Non-recurrent classifiers over fixed-length feature vectors.
//!
//! Features are usually mean-pooled token embeddings
//! ([`EmbeddingModel::pool_mean`](crate::embedding::EmbeddingModel::pool_mean)),
//! one row per sample. Every model scores a row with a probability-like value
//! in `[0, 1]`; labels are `0` (safe) or `1` (vulnerable).

mod gnb;
mod logreg;
mod mlp;
mod tree;

pub use gnb::{GnbModel, VAR_SMOOTHING};
pub use logreg::{LogRegConfig, LogRegModel};
pub use mlp::{MlpConfig, MlpGradients, MlpModel, MlpParams};
pub use tree::{Node, TreeConfig, TreeModel};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Checks a feature matrix against its labels. With `both_classes`, a
/// training set holding a single label is rejected.
pub(crate) fn check_training(features: &Matrix, labels: &[u8], both_classes: bool) -> Result<()> {
    if features.rows() == 0 || features.cols() == 0 {
        return Err(Error::Empty("feature matrix"));
    }
    if features.rows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} feature rows but {} labels",
            features.rows(),
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::InvalidArgument(format!("label {bad} is not 0 or 1")));
    }
    if !features.is_finite() {
        return Err(Error::NonFinite("feature matrix".into()));
    }
    if both_classes {
        let positives = labels.iter().filter(|&&y| y == 1).count();
        if positives == 0 || positives == labels.len() {
            return Err(Error::InvalidArgument(
                "training data must contain both classes".into(),
            ));
        }
    }
    Ok(())
}

pub(crate) fn check_query(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::Shape(format!("expected {dim} features, got {}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("query features".into()));
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod testing {
    use crate::numerics::{Matrix, Rng};

    /// Two Gaussian blobs centred at `-1` and `+1` in every dimension.
    pub fn blobs(n: usize, dim: usize, seed: u64) -> (Matrix, Vec<u8>) {
        let mut rng = Rng::new(seed);
        let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let data = labels
            .iter()
            .flat_map(|&y| {
                let centre = if y == 1 { 1.0 } else { -1.0 };
                (0..dim).map(|_| centre + 0.7 * rng.normal()).collect::<Vec<_>>()
            })
            .collect();
        (Matrix::from_vec(n, dim, data).unwrap(), labels)
    }

    pub fn accuracy(scores: &[f64], labels: &[u8]) -> f64 {
        let hits = scores
            .iter()
            .zip(labels)
            .filter(|(s, &y)| (**s >= 0.5) == (y == 1))
            .count();
        hits as f64 / labels.len() as f64
    }
}
