use serde::{Deserialize, Serialize};

use super::{check_query, check_training};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Gains within this margin count as ties.
const GAIN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
}

/// Tree nodes live in a flat arena; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Fraction of training samples at this leaf with label 1.
        value: f64,
        samples: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<Node>,
    pub max_depth: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

fn gini(positives: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = positives as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

/// Best Gini split of the samples `idx`, considering every midpoint between
/// consecutive distinct values of every feature. The weighted impurity
/// decrease must be positive. Ties go to the lowest feature, then the
/// lowest threshold.
pub(crate) fn best_split(features: &Matrix, labels: &[u8], idx: &[usize]) -> Option<SplitChoice> {
    let n = idx.len();
    let total_pos = idx.iter().filter(|&&i| labels[i] == 1).count();
    let parent = gini(total_pos, n);
    let mut best: Option<SplitChoice> = None;
    let mut order = idx.to_vec();
    for feature in 0..features.cols() {
        order.sort_by(|&a, &b| features.get(a, feature).total_cmp(&features.get(b, feature)));
        let mut left_pos = 0;
        for k in 1..n {
            left_pos += labels[order[k - 1]] as usize;
            let lo = features.get(order[k - 1], feature);
            let hi = features.get(order[k], feature);
            if lo == hi {
                continue;
            }
            let child = (k as f64 * gini(left_pos, k) + (n - k) as f64 * gini(total_pos - left_pos, n - k)) / n as f64;
            let gain = parent - child;
            if gain <= GAIN_TOLERANCE {
                continue;
            }
            // Midpoint; guard against rounding onto the upper value.
            let mut threshold = (lo + hi) / 2.0;
            if threshold >= hi {
                threshold = lo;
            }
            if best.map_or(true, |b| gain > b.gain + GAIN_TOLERANCE) {
                best = Some(SplitChoice { feature, threshold, gain });
            }
        }
    }
    best
}

impl TreeModel {
    /// Greedy depth-first growth. A node becomes a leaf at `max_depth`, when
    /// it is pure, or when no split lowers the impurity.
    pub fn fit(features: &Matrix, labels: &[u8], config: TreeConfig) -> Result<Self> {
        check_training(features, labels, false)?;
        let mut model = TreeModel {
            nodes: Vec::new(),
            max_depth: config.max_depth,
            dim: features.cols(),
        };
        let all: Vec<usize> = (0..features.rows()).collect();
        model.grow(features, labels, all, 0);
        Ok(model)
    }

    fn grow(&mut self, features: &Matrix, labels: &[u8], idx: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let positives = idx.iter().filter(|&&i| labels[i] == 1).count();
        self.nodes.push(Node::Leaf {
            value: positives as f64 / idx.len() as f64,
            samples: idx.len(),
        });
        if depth >= self.max_depth || positives == 0 || positives == idx.len() {
            return id;
        }
        let Some(choice) = best_split(features, labels, &idx) else {
            return id;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| features.get(i, choice.feature) <= choice.threshold);
        let left = self.grow(features, labels, left_idx, depth + 1);
        let right = self.grow(features, labels, right_idx, depth + 1);
        self.nodes[id] = Node::Split {
            feature: choice.feature,
            threshold: choice.threshold,
            left,
            right,
        };
        id
    }

    /// Positive fraction of the leaf reached by `x`.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        check_query(x, self.dim)?;
        let mut at = 0;
        loop {
            match self.nodes.get(at) {
                Some(Node::Leaf { value, .. }) => return Ok(*value),
                Some(Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                }) => at = if x[*feature] <= *threshold { *left } else { *right },
                None => return Err(Error::Artifact(format!("tree references missing node {at}"))),
            }
        }
    }

    /// Length of the longest root-to-leaf path, counted in edges.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            walk(&self.nodes, 0)
        }
    }

    /// Checks arena references after deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Artifact("tree has no nodes".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Split {
                feature, left, right, threshold, ..
            } = node
            {
                let ok = *left > i && *right > i && *left < self.nodes.len() && *right < self.nodes.len();
                if !ok || *feature >= self.dim || !threshold.is_finite() {
                    return Err(Error::Artifact(format!("malformed tree node {i}")));
                }
            }
        }
        if self.depth() > self.max_depth {
            return Err(Error::Artifact("tree deeper than its max_depth".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::testing::{accuracy, blobs};
    use crate::numerics::Rng;
    use proptest::prelude::{prop_assert, proptest};

    fn scores(m: &TreeModel, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|i| m.score(x.row(i)).unwrap()).collect()
    }

    #[test]
    fn separable_line_needs_one_split() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![5.0], vec![6.0]]).unwrap();
        let y = [0, 0, 0, 1, 1];
        let m = TreeModel::fit(&x, &y, TreeConfig { max_depth: 5 }).unwrap();
        assert_eq!(m.depth(), 1);
        assert_eq!(accuracy(&scores(&m, &x), &y), 1.0);
        assert!(matches!(m.nodes[0], Node::Split { threshold, .. } if threshold == 3.5));
    }

    /// Brute force: every feature, every midpoint, impurities recomputed
    /// from scratch by partitioning.
    fn exhaustive(x: &Matrix, y: &[u8]) -> Option<(usize, f64, f64)> {
        let n = y.len();
        let imp = |ys: &[u8]| {
            if ys.is_empty() {
                return 0.0;
            }
            let p = ys.iter().filter(|&&v| v == 1).count() as f64 / ys.len() as f64;
            1.0 - p * p - (1.0 - p) * (1.0 - p)
        };
        let parent = imp(y);
        let mut best: Option<(usize, f64, f64)> = None;
        for f in 0..x.cols() {
            let mut vals: Vec<f64> = (0..n).map(|i| x.get(i, f)).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let left: Vec<u8> = (0..n).filter(|&i| x.get(i, f) <= t).map(|i| y[i]).collect();
                let right: Vec<u8> = (0..n).filter(|&i| x.get(i, f) > t).map(|i| y[i]).collect();
                let gain = parent - (left.len() as f64 * imp(&left) + right.len() as f64 * imp(&right)) / n as f64;
                if gain > 1e-12 && best.map_or(true, |b| gain > b.2 + 1e-12) {
                    best = Some((f, t, gain));
                }
            }
        }
        best
    }

    #[test]
    fn best_split_matches_exhaustive_search() {
        let rows = vec![
            vec![1.0, 7.0],
            vec![2.0, 3.0],
            vec![3.0, 8.0],
            vec![4.0, 1.0],
            vec![5.0, 9.0],
            vec![6.0, 2.0],
        ];
        let x = Matrix::from_rows(&rows).unwrap();
        let y = [1, 0, 1, 0, 1, 0];
        let got = best_split(&x, &y, &[0, 1, 2, 3, 4, 5]).unwrap();
        let (f, t, g) = exhaustive(&x, &y).unwrap();
        assert_eq!((got.feature, got.threshold), (f, t));
        assert_eq!((f, t), (1, 5.0));
        assert!((got.gain - g).abs() < 1e-12);

        let mut rng = Rng::new(31);
        for _ in 0..200 {
            let data: Vec<f64> = (0..12).map(|_| rng.below(5) as f64).collect();
            let x = Matrix::from_vec(6, 2, data).unwrap();
            let y: Vec<u8> = (0..6).map(|_| rng.below(2) as u8).collect();
            let got = best_split(&x, &y, &[0, 1, 2, 3, 4, 5]).map(|c| (c.feature, c.threshold));
            assert_eq!(got, exhaustive(&x, &y).map(|(f, t, _)| (f, t)));
        }
    }

    #[test]
    fn ties_prefer_lowest_feature_then_threshold() {
        // Both features separate the data equally well.
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let c = best_split(&x, &[0, 1], &[0, 1]).unwrap();
        assert_eq!((c.feature, c.threshold), (0, 0.5));
    }

    #[test]
    fn constant_features_make_a_leaf() {
        let x = Matrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        let m = TreeModel::fit(&x, &[0, 1, 1], TreeConfig { max_depth: 3 }).unwrap();
        assert_eq!(m.nodes.len(), 1);
        assert!((m.score(&[9.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_depth_is_the_base_rate() {
        let (x, y) = blobs(10, 2, 1);
        let m = TreeModel::fit(&x, &y, TreeConfig { max_depth: 0 }).unwrap();
        assert_eq!(m.score(&[0.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn serde_round_trip() {
        let (x, y) = blobs(40, 3, 6);
        let m = TreeModel::fit(&x, &y, TreeConfig { max_depth: 4 }).unwrap();
        let back: TreeModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        back.validate().unwrap();
        assert_eq!(scores(&m, &x), scores(&back, &x));
    }

    proptest! {
        #[test]
        fn depth_never_exceeds_limit(seed: u64, max_depth in 0usize..4, n in 2usize..40) {
            let mut rng = Rng::new(seed);
            let data: Vec<f64> = (0..n * 3).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let x = Matrix::from_vec(n, 3, data).unwrap();
            let y: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
            let m = TreeModel::fit(&x, &y, TreeConfig { max_depth }).unwrap();
            prop_assert!(m.depth() <= max_depth);
            prop_assert!(m.validate().is_ok());
            for s in scores(&m, &x) {
                prop_assert!((0.0..=1.0).contains(&s));
            }
        }
    }
}
