//! Dense linear algebra, activations, losses, Adam, the seeded RNG and the
//! finite-difference gradient checker used by every learned model.
//!
//! Everything here is `f64` and single-threaded. All randomness flows through
//! an explicit [`Rng`]; there is no global state.

mod activation;
mod adam;
mod gradcheck;
mod loss;
mod matrix;
mod rng;

pub use activation::{relu, sigmoid, sigmoid_slice, softplus, tanh, tanh_slice};
pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{gradient_check, GradCheck};
pub use loss::mse_loss;
pub use matrix::Matrix;
#[allow(unused_imports)]
pub(crate) use matrix::{accumulate_mat_vec, accumulate_outer, accumulate_vec_mat};
pub use rng::Rng;

use crate::error::{Error, Result};

/// An ordered collection of parameter matrices.
///
/// The order returned by [`params`](ParamSet::params) and
/// [`params_mut`](ParamSet::params_mut) must agree; optimizers and the
/// gradient checker pair parameters with gradients by position.
pub trait ParamSet {
    fn params(&self) -> Vec<&Matrix>;
    fn params_mut(&mut self) -> Vec<&mut Matrix>;

    fn num_params(&self) -> usize {
        self.params().iter().map(|m| m.len()).sum()
    }

    /// Concatenation of all parameters in declaration order.
    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for m in self.params() {
            out.extend_from_slice(m.as_slice());
        }
        out
    }

    fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        let total = self.num_params();
        if flat.len() != total {
            return Err(Error::Shape(format!(
                "flat parameter vector has {} entries, expected {total}",
                flat.len()
            )));
        }
        let mut offset = 0;
        for m in self.params_mut() {
            let n = m.len();
            m.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
