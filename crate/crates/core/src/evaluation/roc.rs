use serde::{Deserialize, Serialize};

use super::check_scores;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    /// Score threshold of every point after the first.
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

/// Sweeps the threshold over the distinct scores in descending order. Tied
/// scores move the curve in a single step, so ties contribute a diagonal
/// segment. The area is integrated with the trapezoidal rule.
pub fn roc(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    check_scores(scores, labels)?;
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::InvalidArgument("ROC needs both positive and negative labels".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut k = 0;
    while k < order.len() {
        let threshold = scores[order[k]];
        while k < order.len() && scores[order[k]] == threshold {
            if labels[order[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        let point = (fp as f64 / negatives as f64, tp as f64 / positives as f64);
        let (x0, y0) = *points.last().expect("curve starts at the origin");
        auc += (point.0 - x0) * (point.1 + y0) / 2.0;
        points.push(point);
        thresholds.push(threshold);
    }
    Ok(RocCurve { points, thresholds, auc })
}
