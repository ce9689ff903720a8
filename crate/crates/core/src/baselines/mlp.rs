use serde::{Deserialize, Serialize};

use super::{check_query, check_training};
use crate::error::{Error, Result};
use crate::numerics::{dot, sigmoid, softplus, AdamConfig, AdamState, Matrix, ParamSet, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    /// L2 penalty on the weight matrices, divided by the batch size.
    pub alpha: f64,
    /// Upper bound on the mini-batch size; the effective size is
    /// `min(batch_size, n)`.
    pub batch_size: usize,
    pub max_epochs: usize,
    /// An epoch "improves" when its loss beats the best so far by more
    /// than `tolerance`.
    pub tolerance: f64,
    /// Training stops after more than this many epochs without improvement.
    pub n_iter_no_change: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: 100,
            learning_rate: 1e-3,
            alpha: 1e-4,
            batch_size: 200,
            max_epochs: 300,
            tolerance: 1e-4,
            n_iter_no_change: 10,
            seed: 1,
        }
    }
}

/// Weights of a one-hidden-layer network; also used for its gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    /// `dim x hidden`.
    pub w1: Matrix,
    /// `1 x hidden`.
    pub b1: Matrix,
    /// `hidden x 1`.
    pub w2: Matrix,
    /// `1 x 1`.
    pub b2: Matrix,
}

pub type MlpGradients = MlpParams;

impl ParamSet for MlpParams {
    fn params(&self) -> Vec<&Matrix> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

impl MlpParams {
    fn zeros(dim: usize, hidden: usize) -> Self {
        MlpParams {
            w1: Matrix::zeros(dim, hidden),
            b1: Matrix::zeros(1, hidden),
            w2: Matrix::zeros(hidden, 1),
            b2: Matrix::zeros(1, 1),
        }
    }

    /// Glorot-uniform weights and biases.
    fn init(dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        let b1_bound = (6.0 / (dim + hidden) as f64).sqrt();
        let b2_bound = (6.0 / (hidden + 1) as f64).sqrt();
        MlpParams {
            w1: Matrix::glorot(dim, hidden, rng),
            b1: Matrix::uniform(1, hidden, b1_bound, rng),
            w2: Matrix::glorot(hidden, 1, rng),
            b2: Matrix::uniform(1, 1, b2_bound, rng),
        }
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        let mut h = self.b1.as_slice().to_vec();
        crate::numerics::accumulate_vec_mat(&mut h, x, self.w1.as_slice());
        h.iter_mut().for_each(|v| *v = v.max(0.0));
        h
    }

    fn logit(&self, x: &[f64]) -> f64 {
        dot(&self.hidden(x), self.w2.as_slice()) + self.b2.get(0, 0)
    }

    /// Mean log-loss over `rows` plus `alpha / (2 m) * |W|^2`, and its
    /// gradient.
    pub fn loss_and_grad(&self, features: &Matrix, labels: &[u8], rows: &[usize], alpha: f64) -> (f64, MlpGradients) {
        let m = rows.len() as f64;
        let hidden = self.w2.rows();
        let mut grad = MlpParams::zeros(self.w1.rows(), hidden);
        let mut loss = 0.0;
        let mut dh = vec![0.0; hidden];
        for &r in rows {
            let x = features.row(r);
            let h = self.hidden(x);
            let z = dot(&h, self.w2.as_slice()) + self.b2.get(0, 0);
            let y = labels[r] as f64;
            loss += softplus(z) - y * z;
            let dz = (sigmoid(z) - y) / m;
            grad.w2.as_mut_slice().iter_mut().zip(&h).for_each(|(g, hv)| *g += dz * hv);
            grad.b2.as_mut_slice()[0] += dz;
            for ((d, &hv), &w) in dh.iter_mut().zip(&h).zip(self.w2.as_slice()) {
                *d = if hv > 0.0 { dz * w } else { 0.0 };
            }
            grad.b1.as_mut_slice().iter_mut().zip(&dh).for_each(|(g, d)| *g += d);
            crate::numerics::accumulate_outer(grad.w1.as_mut_slice(), x, &dh);
        }
        loss /= m;
        let sq = dot(self.w1.as_slice(), self.w1.as_slice()) + dot(self.w2.as_slice(), self.w2.as_slice());
        loss += 0.5 * alpha * sq / m;
        grad.w1.add_scaled(&self.w1, alpha / m).expect("same shape");
        grad.w2.add_scaled(&self.w2, alpha / m).expect("same shape");
        (loss, grad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub params: MlpParams,
    pub config: MlpConfig,
    /// Mean training loss of every completed epoch.
    pub loss_curve: Vec<f64>,
}

impl MlpModel {
    /// Mini-batch Adam on shuffled data until `max_epochs` or the
    /// no-improvement rule stops training.
    pub fn fit(features: &Matrix, labels: &[u8], config: &MlpConfig) -> Result<Self> {
        check_training(features, labels, true)?;
        if config.hidden == 0 || config.batch_size == 0 {
            return Err(Error::InvalidArgument("hidden width and batch size must be positive".into()));
        }
        let n = features.rows();
        let mut rng = Rng::new(config.seed);
        let mut params = MlpParams::init(features.cols(), config.hidden, &mut rng);
        let adam_config = AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        };
        let mut adam = AdamState::new(adam_config, &params.params())?;
        let batch = config.batch_size.min(n);
        let mut order: Vec<usize> = (0..n).collect();
        let mut loss_curve = Vec::new();
        let mut best = f64::INFINITY;
        let mut stale = 0;

        for epoch in 0..config.max_epochs {
            rng.shuffle(&mut order);
            let mut total = 0.0;
            for (b, rows) in order.chunks(batch).enumerate() {
                let (loss, grad) = params.loss_and_grad(features, labels, rows, config.alpha);
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch, batch: b });
                }
                total += loss * rows.len() as f64;
                adam.step(&mut params.params_mut(), &grad.params())?;
            }
            let epoch_loss = total / n as f64;
            loss_curve.push(epoch_loss);
            if epoch_loss > best - config.tolerance {
                stale += 1;
            } else {
                stale = 0;
            }
            best = best.min(epoch_loss);
            if stale > config.n_iter_no_change {
                break;
            }
        }
        Ok(MlpModel {
            params,
            config: *config,
            loss_curve,
        })
    }

    pub fn from_params(params: MlpParams, config: MlpConfig) -> Self {
        MlpModel {
            params,
            config,
            loss_curve: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.params.w1.rows()
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        check_query(x, self.dim())?;
        Ok(sigmoid(self.params.logit(x)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::testing::{accuracy, blobs};
    use crate::numerics::gradient_check;

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = Rng::new(12);
        let (x, y) = blobs(6, 3, 2);
        let rows: Vec<usize> = (0..6).collect();
        for _ in 0..5 {
            let params = MlpParams::init(3, 4, &mut rng);
            let (_, grad) = params.loss_and_grad(&x, &y, &rows, 0.1);
            let f = |flat: &[f64]| {
                let mut p = params.clone();
                p.load_flat(flat)?;
                Ok(p.loss_and_grad(&x, &y, &rows, 0.1).0)
            };
            let check = gradient_check(f, &grad.to_flat(), &params.to_flat(), 1e-6).unwrap();
            assert!(check.max_rel_error < 1e-6, "{check:?}");
        }
    }

    #[test]
    fn zero_weights_score_the_output_bias() {
        let mut params = MlpParams::zeros(3, 100);
        params.b2.set(0, 0, 0.7);
        let m = MlpModel::from_params(params, MlpConfig::default());
        for x in [[0.0, 0.0, 0.0], [5.0, -2.0, 1.0]] {
            assert_eq!(m.score(&x).unwrap(), sigmoid(0.7));
        }
    }

    #[test]
    fn learns_xor_for_some_seed() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let y = [0, 1, 1, 0];
        let solved = (1..=5).any(|seed| {
            let config = MlpConfig {
                seed,
                ..MlpConfig::default()
            };
            let m = MlpModel::fit(&x, &y, &config).unwrap();
            assert!(m.loss_curve.len() <= 300);
            let scores: Vec<f64> = (0..4).map(|i| m.score(x.row(i)).unwrap()).collect();
            accuracy(&scores, &y) == 1.0
        });
        assert!(solved);
    }

    #[test]
    fn fits_blobs_deterministically() {
        let (x, y) = blobs(60, 4, 3);
        let config = MlpConfig {
            max_epochs: 50,
            ..MlpConfig::default()
        };
        let a = MlpModel::fit(&x, &y, &config).unwrap();
        let b = MlpModel::fit(&x, &y, &config).unwrap();
        assert_eq!(a, b);
        assert!(a.loss_curve.last() < a.loss_curve.first());
        let scores: Vec<f64> = (0..60).map(|i| a.score(x.row(i)).unwrap()).collect();
        assert!(accuracy(&scores, &y) > 0.9);
        assert!(scores.iter().all(|s| (0.0..=1.0).contains(s)));
    }

    #[test]
    fn stops_early_when_loss_plateaus() {
        // Constant features: nothing beyond the base rate can be learned.
        let x = Matrix::from_rows(&vec![vec![0.0, 0.0]; 8]).unwrap();
        let y = [0, 1, 0, 1, 0, 1, 0, 1];
        let config = MlpConfig {
            learning_rate: 0.1,
            ..MlpConfig::default()
        };
        let m = MlpModel::fit(&x, &y, &config).unwrap();
        assert!(m.loss_curve.len() < 300, "{}", m.loss_curve.len());
    }
}
