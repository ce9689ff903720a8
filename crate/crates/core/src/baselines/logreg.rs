use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{check_query, check_training};
use crate::error::{Error, Result};
use crate::numerics::{dot, sigmoid, softplus, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    /// Inverse regularization strength `C`: the objective is
    /// `0.5 |w|^2 + C * sum_i logloss_i`, with the bias unpenalized.
    pub c: f64,
    /// Stop once the gradient norm of the objective divided by `n` falls
    /// below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Number of curvature pairs kept by L-BFGS.
    pub memory: usize,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            c: 1.0,
            tolerance: 1e-6,
            max_iterations: 1000,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    /// Solver iterations used by the fit.
    pub iterations: usize,
}

/// The regularized objective scaled by `1/n`, and its gradient. The last
/// coordinate of `theta` and of the gradient is the bias.
pub fn objective(features: &Matrix, labels: &[u8], c: f64, theta: &[f64]) -> (f64, Vec<f64>) {
    let d = features.cols();
    let n = features.rows() as f64;
    let (w, b) = theta.split_at(d);
    let mut grad = vec![0.0; d + 1];
    let mut loss = 0.5 * dot(w, w);
    grad[..d].copy_from_slice(w);
    for (r, &y) in labels.iter().enumerate() {
        let x = features.row(r);
        let z = dot(w, x) + b[0];
        let y = y as f64;
        loss += c * (softplus(z) - y * z);
        let g = c * (sigmoid(z) - y);
        grad[..d].iter_mut().zip(x).for_each(|(gj, xj)| *gj += g * xj);
        grad[d] += g;
    }
    grad.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad)
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

impl LogRegModel {
    /// Minimizes the objective with L-BFGS and a backtracking Armijo line
    /// search, starting from zero. Fails with [`Error::NotConverged`] when the
    /// tolerance is not met within `max_iterations`.
    pub fn fit(features: &Matrix, labels: &[u8], config: &LogRegConfig) -> Result<Self> {
        check_training(features, labels, true)?;
        if !(config.c > 0.0 && config.c.is_finite()) {
            return Err(Error::InvalidArgument("regularization strength must be positive".into()));
        }
        let d = features.cols();
        let mut theta = vec![0.0; d + 1];
        let (mut f, mut g) = objective(features, labels, config.c, &theta);
        let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.memory);

        for iteration in 0..config.max_iterations {
            if norm(&g) < config.tolerance {
                return Ok(Self::from_theta(theta, config.c, iteration));
            }

            // Two-loop recursion for the search direction -H g.
            let mut q = g.clone();
            let mut alphas = Vec::with_capacity(history.len());
            for (s, y, rho) in history.iter().rev() {
                let a = rho * dot(s, &q);
                q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
                alphas.push(a);
            }
            if let Some((s, y, _)) = history.back() {
                let gamma = dot(s, y) / dot(y, y);
                q.iter_mut().for_each(|qi| *qi *= gamma);
            }
            for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
                let beta = rho * dot(y, &q);
                q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - beta) * si);
            }
            let mut direction: Vec<f64> = q.iter().map(|v| -v).collect();
            let mut slope = dot(&g, &direction);
            if slope >= 0.0 {
                // Not a descent direction; restart from steepest descent.
                history.clear();
                direction = g.iter().map(|v| -v).collect();
                slope = -dot(&g, &g);
            }

            let mut step = 1.0;
            let (theta_new, f_new, g_new) = loop {
                let candidate: Vec<f64> = theta.iter().zip(&direction).map(|(t, p)| t + step * p).collect();
                let (fc, gc) = objective(features, labels, config.c, &candidate);
                if fc <= f + 1e-4 * step * slope {
                    break (candidate, fc, gc);
                }
                step *= 0.5;
                if step < 1e-20 {
                    return Err(Error::NotConverged {
                        iterations: iteration,
                        grad_norm: norm(&g),
                    });
                }
            };
            if !f_new.is_finite() {
                return Err(Error::NonFinite("logistic regression objective".into()));
            }

            let s: Vec<f64> = theta_new.iter().zip(&theta).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * norm(&s) * norm(&y) {
                if history.len() == config.memory {
                    history.pop_front();
                }
                history.push_back((s, y, 1.0 / sy));
            }
            theta = theta_new;
            f = f_new;
            g = g_new;
        }
        if norm(&g) < config.tolerance {
            return Ok(Self::from_theta(theta, config.c, config.max_iterations));
        }
        Err(Error::NotConverged {
            iterations: config.max_iterations,
            grad_norm: norm(&g),
        })
    }

    fn from_theta(mut theta: Vec<f64>, c: f64, iterations: usize) -> Self {
        let bias = theta.pop().expect("bias coordinate");
        LogRegModel {
            weights: theta,
            bias,
            c,
            iterations,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `sigmoid(w . x + b)`.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        check_query(x, self.dim())?;
        Ok(sigmoid(dot(&self.weights, x) + self.bias))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::testing::{accuracy, blobs};
    use crate::numerics::{gradient_check, Rng};

    fn fit(x: &Matrix, y: &[u8]) -> LogRegModel {
        LogRegModel::fit(x, y, &LogRegConfig::default()).unwrap()
    }

    #[test]
    fn antisymmetric_data_gives_zero_bias() {
        let mut rng = Rng::new(3);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..10 {
            let x: Vec<f64> = (0..3).map(|_| rng.uniform(-2.0, 2.0)).collect();
            rows.push(x.iter().map(|v| -v).collect());
            rows.push(x);
            y.extend([0, 1]);
        }
        let m = fit(&Matrix::from_rows(&rows).unwrap(), &y);
        assert!(m.bias.abs() < 1e-6, "{}", m.bias);
    }

    #[test]
    fn separable_pair_lands_on_correct_sides() {
        let x = Matrix::from_rows(&[vec![-1.0], vec![1.0]]).unwrap();
        let m = fit(&x, &[0, 1]);
        assert!(m.score(&[-1.0]).unwrap() < 0.5);
        assert!(m.score(&[1.0]).unwrap() > 0.5);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (x, y) = blobs(12, 3, 9);
        let mut rng = Rng::new(1);
        let theta: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let (_, g) = objective(&x, &y, 1.0, &theta);
        let check = gradient_check(|t| Ok(objective(&x, &y, 1.0, t).0), &g, &theta, 1e-6).unwrap();
        assert!(check.max_rel_error < 1e-7, "{check:?}");
    }

    #[test]
    fn beats_dense_grid_search() {
        // Five 1-D points; parameters are (w, b).
        let x = Matrix::from_rows(&[vec![-2.0], vec![-0.5], vec![0.3], vec![1.0], vec![2.5]]).unwrap();
        let y = [0, 1, 0, 1, 1];
        let m = fit(&x, &y);
        let achieved = objective(&x, &y, 1.0, &[m.weights[0], m.bias]).0;
        let mut best = f64::INFINITY;
        for i in 0..=400 {
            for j in 0..=400 {
                let w = -4.0 + 8.0 * i as f64 / 400.0;
                let b = -4.0 + 8.0 * j as f64 / 400.0;
                best = best.min(objective(&x, &y, 1.0, &[w, b]).0);
            }
        }
        assert!(achieved <= best, "{achieved} > {best}");
        assert!(achieved > best - 1e-3);
    }

    #[test]
    fn order_invariant() {
        let (x, y) = blobs(30, 2, 5);
        let m = fit(&x, &y);
        let rows: Vec<Vec<f64>> = (0..30).rev().map(|i| x.row(i).to_vec()).collect();
        let ys: Vec<u8> = y.iter().rev().copied().collect();
        let r = fit(&Matrix::from_rows(&rows).unwrap(), &ys);
        for i in 0..30 {
            assert!((m.score(x.row(i)).unwrap() - r.score(x.row(i)).unwrap()).abs() < 1e-6);
        }
        let scores: Vec<f64> = (0..30).map(|i| m.score(x.row(i)).unwrap()).collect();
        assert!(accuracy(&scores, &y) > 0.9);
    }

    #[test]
    fn iteration_budget_is_reported() {
        let (x, y) = blobs(30, 4, 5);
        let config = LogRegConfig {
            max_iterations: 1,
            tolerance: 1e-14,
            ..LogRegConfig::default()
        };
        match LogRegModel::fit(&x, &y, &config) {
            Err(Error::NotConverged { iterations, grad_norm }) => {
                assert_eq!(iterations, 1);
                assert!(grad_norm > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }
}
