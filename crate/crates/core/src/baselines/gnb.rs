use serde::{Deserialize, Serialize};

use super::{check_query, check_training};
use crate::error::Result;
use crate::numerics::{sigmoid, Matrix};

/// Relative variance smoothing: `epsilon = 1e-9 * max feature variance`.
pub const VAR_SMOOTHING: f64 = 1e-9;

/// Gaussian naive Bayes with per-class, per-feature means and variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbModel {
    /// `[P(y = 0), P(y = 1)]`.
    pub priors: [f64; 2],
    /// Row `c` holds the feature means of class `c`.
    pub means: Matrix,
    /// Row `c` holds the smoothed feature variances of class `c`.
    pub variances: Matrix,
    pub epsilon: f64,
}

impl GnbModel {
    /// Closed-form fit. Variances are population variances plus `epsilon`;
    /// when every feature is constant `epsilon` falls back to `1e-9` so the
    /// likelihoods stay finite.
    pub fn fit(features: &Matrix, labels: &[u8]) -> Result<Self> {
        check_training(features, labels, true)?;
        let (n, d) = features.shape();

        let mut counts = [0usize; 2];
        let mut means = Matrix::zeros(2, d);
        for (r, &y) in labels.iter().enumerate() {
            counts[y as usize] += 1;
            let row = features.row(r);
            means.row_mut(y as usize).iter_mut().zip(row).for_each(|(m, x)| *m += x);
        }
        for (c, &k) in counts.iter().enumerate() {
            means.row_mut(c).iter_mut().for_each(|m| *m /= k as f64);
        }

        let mut variances = Matrix::zeros(2, d);
        for (r, &y) in labels.iter().enumerate() {
            let c = y as usize;
            for j in 0..d {
                let dev = features.get(r, j) - means.get(c, j);
                variances.row_mut(c)[j] += dev * dev;
            }
        }

        // Largest variance of any feature over the pooled data.
        let mut max_var: f64 = 0.0;
        for j in 0..d {
            let mean = (0..n).map(|r| features.get(r, j)).sum::<f64>() / n as f64;
            let var = (0..n).map(|r| (features.get(r, j) - mean).powi(2)).sum::<f64>() / n as f64;
            max_var = max_var.max(var);
        }
        let epsilon = if max_var > 0.0 { VAR_SMOOTHING * max_var } else { VAR_SMOOTHING };

        for (c, &k) in counts.iter().enumerate() {
            variances.row_mut(c).iter_mut().for_each(|v| *v = *v / k as f64 + epsilon);
        }
        Ok(GnbModel {
            priors: [counts[0] as f64 / n as f64, counts[1] as f64 / n as f64],
            means,
            variances,
            epsilon,
        })
    }

    pub fn dim(&self) -> usize {
        self.means.cols()
    }

    fn log_joint(&self, class: usize, x: &[f64]) -> f64 {
        let mut acc = self.priors[class].ln();
        for ((&xj, &mu), &var) in x.iter().zip(self.means.row(class)).zip(self.variances.row(class)) {
            acc -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (xj - mu).powi(2) / var);
        }
        acc
    }

    /// Posterior probability of class 1.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        check_query(x, self.dim())?;
        Ok(sigmoid(self.log_joint(1, x) - self.log_joint(0, x)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::testing::{accuracy, blobs};
    use crate::numerics::Rng;

    #[test]
    fn symmetric_classes_score_one_half() {
        let x = Matrix::from_rows(&[vec![-1.0], vec![-1.0], vec![1.0], vec![1.0]]).unwrap();
        let m = GnbModel::fit(&x, &[0, 0, 1, 1]).unwrap();
        assert_eq!(m.score(&[0.0]).unwrap(), 0.5);
        // Every feature constant within a class: epsilon from pooled variance 1.
        assert_eq!(m.epsilon, 1e-9);
    }

    #[test]
    fn identical_distributions_return_the_prior() {
        let rows = vec![vec![0.5, 2.0], vec![1.5, -1.0], vec![0.5, 2.0], vec![1.5, -1.0], vec![0.5, 2.0], vec![1.5, -1.0]];
        let x = Matrix::from_rows(&rows).unwrap();
        // Class 1 holds the first four rows (two copies), class 0 the last two.
        let m = GnbModel::fit(&x, &[1, 1, 1, 1, 0, 0]).unwrap();
        for q in [[0.0, 0.0], [3.0, -7.0], [1.0, 1.0]] {
            assert!((m.score(&q).unwrap() - 4.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_hand_computed_posterior() {
        // Class 0: (0,0), (2,2)  -> means (1,1), variances (1,1)
        // Class 1: (1,3), (3,5), (5,4) -> means (3,4), variances (8/3, 2/3)
        let rows = vec![vec![0.0, 0.0], vec![2.0, 2.0], vec![1.0, 3.0], vec![3.0, 5.0], vec![5.0, 4.0]];
        let x = Matrix::from_rows(&rows).unwrap();
        let m = GnbModel::fit(&x, &[0, 0, 1, 1, 1]).unwrap();
        let eps = m.epsilon;
        // Pooled variances: 2.96 for both features.
        assert!((eps - 2.96e-9).abs() < 1e-20);

        let gauss = |x: f64, mu: f64, var: f64| (-(x - mu).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
        let q = [2.0, 3.0];
        let p0 = 0.4 * gauss(q[0], 1.0, 1.0 + eps) * gauss(q[1], 1.0, 1.0 + eps);
        let p1 = 0.6 * gauss(q[0], 3.0, 8.0 / 3.0 + eps) * gauss(q[1], 4.0, 2.0 / 3.0 + eps);
        let want = p1 / (p0 + p1);
        assert!((m.score(&q).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn order_invariant_and_accurate() {
        let (x, y) = blobs(80, 3, 2);
        let m = GnbModel::fit(&x, &y).unwrap();
        let mut perm: Vec<usize> = (0..80).collect();
        Rng::new(4).shuffle(&mut perm);
        let rows: Vec<Vec<f64>> = perm.iter().map(|&i| x.row(i).to_vec()).collect();
        let ys: Vec<u8> = perm.iter().map(|&i| y[i]).collect();
        let shuffled = GnbModel::fit(&Matrix::from_rows(&rows).unwrap(), &ys).unwrap();
        let scores: Vec<f64> = (0..80).map(|i| m.score(x.row(i)).unwrap()).collect();
        for (i, s) in scores.iter().enumerate() {
            assert!((s - shuffled.score(x.row(i)).unwrap()).abs() < 1e-12);
            assert!((0.0..=1.0).contains(s));
        }
        assert!(accuracy(&scores, &y) > 0.9);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(GnbModel::fit(&x, &[1, 1]).is_err());
    }
}
