//! Confusion counts, threshold metrics, ROC curves and macro-averaged
//! reports.
//!
//! A sample is predicted positive when `score >= threshold`. Metrics whose
//! denominator is zero are reported as `0` and listed in
//! [`Metrics::undefined`].

mod report;
mod roc;

pub use report::{aggregate, render_text, roc_csv, EvaluationReport, MacroAverage};
pub use roc::{roc, RocCurve};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub(crate) fn check_scores(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    if scores.is_empty() {
        return Err(Error::Empty("score list"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores".into()));
    }
    if let Some(bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::InvalidArgument(format!("label {bad} is not 0 or 1")));
    }
    Ok(())
}

pub fn confusion(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionCounts> {
    check_scores(scores, labels)?;
    let mut c = ConfusionCounts::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    /// Names of metrics that had a zero denominator and were set to 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<String>,
}

pub fn metrics(counts: &ConfusionCounts) -> Metrics {
    let mut undefined = Vec::new();
    let mut ratio = |num: u64, den: u64, name: &str| {
        if den == 0 {
            undefined.push(name.to_string());
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let accuracy = ratio(counts.tp + counts.tn, counts.total(), "accuracy");
    let precision = ratio(counts.tp, counts.tp + counts.fp, "precision");
    let recall = ratio(counts.tp, counts.tp + counts.fn_, "recall");
    let f_score = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        undefined.push("f_score".to_string());
        0.0
    };
    Metrics {
        accuracy,
        precision,
        recall,
        f_score,
        undefined,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use proptest::prelude::{prop_assert_eq, proptest};

    fn counts(tp: u64, fp: u64, tn: u64, fn_: u64) -> ConfusionCounts {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    #[test]
    fn confusion_examples() {
        assert_eq!(confusion(&[0.9, 0.1], &[1, 0], 0.5).unwrap(), counts(1, 0, 1, 0));
        let c = confusion(&[0.1, 0.2, 0.3], &[1, 0, 1], 0.5).unwrap();
        assert_eq!((c.tp, c.fp), (0, 0));
        assert_eq!(confusion(&[0.5], &[1], 0.5).unwrap().tp, 1);
        assert!(confusion(&[0.5], &[1, 0], 0.5).is_err());
        assert!(confusion(&[], &[], 0.5).is_err());
        assert!(confusion(&[f64::NAN], &[0], 0.5).is_err());
    }

    #[test]
    fn confusion_matches_counting_oracle() {
        let mut rng = Rng::new(2);
        for _ in 0..100 {
            let n = 1 + rng.below(50);
            let scores: Vec<f64> = (0..n).map(|_| (rng.below(11) as f64) / 10.0).collect();
            let labels: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
            let t = rng.below(11) as f64 / 10.0;
            let count = |pred: bool, y: u8| scores.iter().zip(&labels).filter(|(s, l)| (**s >= t) == pred && **l == y).count() as u64;
            let want = counts(count(true, 1), count(true, 0), count(false, 0), count(false, 1));
            assert_eq!(confusion(&scores, &labels, t).unwrap(), want);
        }
    }

    #[test]
    fn metric_examples() {
        let m = metrics(&counts(1, 1, 1, 1));
        assert_eq!((m.accuracy, m.precision, m.recall, m.f_score), (0.5, 0.5, 0.5, 0.5));
        let m = metrics(&counts(3, 0, 4, 0));
        assert_eq!((m.accuracy, m.precision, m.recall, m.f_score), (1.0, 1.0, 1.0, 1.0));
        assert!(m.undefined.is_empty());

        let m = metrics(&counts(45, 2, 50, 3));
        let (p, r) = (45.0 / 47.0, 45.0 / 48.0);
        assert!((m.precision - p).abs() < 1e-12);
        assert!((m.recall - r).abs() < 1e-12);
        assert!((m.f_score - 2.0 * p * r / (p + r)).abs() < 1e-12);
        assert!((m.accuracy - 0.95).abs() < 1e-12);
    }

    #[test]
    fn zero_denominators_are_flagged() {
        let m = metrics(&counts(0, 0, 5, 0));
        assert_eq!((m.precision, m.recall, m.f_score), (0.0, 0.0, 0.0));
        assert_eq!(m.undefined, vec!["precision", "recall", "f_score"]);
        assert_eq!(m.accuracy, 1.0);
    }

    proptest! {
        #[test]
        fn metrics_are_permutation_invariant(seed: u64, n in 1usize..60) {
            let mut rng = Rng::new(seed);
            let scores: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
            let labels: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
            let mut idx: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut idx);
            let s2: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
            let l2: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
            let a = metrics(&confusion(&scores, &labels, 0.5).unwrap());
            let b = metrics(&confusion(&s2, &l2, 0.5).unwrap());
            prop_assert_eq!(a, b);
        }
    }
}
