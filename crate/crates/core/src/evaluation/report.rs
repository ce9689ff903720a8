use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{confusion, metrics, roc, ConfusionCounts, Metrics, RocCurve};
use crate::corpus::{Partition, VulnClass};
use crate::error::{Error, Result};
use crate::model::{ModelKind, Provenance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub vuln_class: VulnClass,
    pub model_kind: ModelKind,
    pub partition: Partition,
    pub samples: usize,
    pub threshold: f64,
    pub confusion: ConfusionCounts,
    pub metrics: Metrics,
    /// `None` when the partition holds only one class.
    pub auc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roc: Option<RocCurve>,
    /// Provenance of the model that produced the scores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl EvaluationReport {
    pub fn from_scores(
        vuln_class: VulnClass,
        model_kind: ModelKind,
        partition: Partition,
        scores: &[f64],
        labels: &[u8],
        threshold: f64,
    ) -> Result<Self> {
        let counts = confusion(scores, labels, threshold)?;
        let curve = roc(scores, labels).ok();
        Ok(EvaluationReport {
            vuln_class,
            model_kind,
            partition,
            samples: scores.len(),
            threshold,
            confusion: counts,
            metrics: metrics(&counts),
            auc: curve.as_ref().map(|c| c.auc),
            roc: curve,
            provenance: None,
        })
    }
}

/// Unweighted means over a set of reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroAverage {
    pub reports: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    /// Mean over the reports that have an AUC.
    pub auc: Option<f64>,
}

pub fn aggregate(reports: &[EvaluationReport]) -> Result<MacroAverage> {
    if reports.is_empty() {
        return Err(Error::Empty("report list"));
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&Metrics) -> f64| reports.iter().map(|r| f(&r.metrics)).sum::<f64>() / n;
    let aucs: Vec<f64> = reports.iter().filter_map(|r| r.auc).collect();
    Ok(MacroAverage {
        reports: reports.len(),
        accuracy: mean(|m| m.accuracy),
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        f_score: mean(|m| m.f_score),
        auc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
    })
}

fn fmt_auc(auc: Option<f64>) -> String {
    auc.map_or_else(|| "-".to_string(), |a| format!("{a:.4}"))
}

/// Aligned plain-text table, one row per report plus an optional average row.
pub fn render_text(reports: &[EvaluationReport], average: Option<&MacroAverage>) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<22} {:<7} {:<10} {:>6} {:>8} {:>9} {:>8} {:>8} {:>8}",
        "class", "model", "partition", "n", "accuracy", "precision", "recall", "f_score", "auc"
    );
    for r in reports {
        let m = &r.metrics;
        let _ = write!(
            out,
            "{:<22} {:<7} {:<10} {:>6} {:>8.4} {:>9.4} {:>8.4} {:>8.4} {:>8}",
            r.vuln_class.as_str(),
            r.model_kind.as_str(),
            r.partition.to_string(),
            r.samples,
            m.accuracy,
            m.precision,
            m.recall,
            m.f_score,
            fmt_auc(r.auc)
        );
        if !m.undefined.is_empty() {
            let _ = write!(out, "  (undefined: {})", m.undefined.join(", "));
        }
        out.push('\n');
    }
    if let Some(a) = average {
        let _ = writeln!(
            out,
            "{:<22} {:<7} {:<10} {:>6} {:>8.4} {:>9.4} {:>8.4} {:>8.4} {:>8}",
            "macro average", "", "", a.reports, a.accuracy, a.precision, a.recall, a.f_score, fmt_auc(a.auc)
        );
    }
    out
}

/// `fpr,tpr` CSV with a header row.
pub fn roc_csv(curve: &RocCurve) -> String {
    let mut out = String::from("fpr,tpr\n");
    for (x, y) in &curve.points {
        let _ = writeln!(out, "{x},{y}");
    }
    out
}
