use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// `max_i |analytic_i - numeric_i| / max(1, |analytic_i|, |numeric_i|)`.
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub numeric: Vec<f64>,
}

/// Compares an analytic gradient against central differences of `f` at
/// `point`, one coordinate at a time.
pub fn gradient_check<F>(mut f: F, analytic: &[f64], point: &[f64], step: f64) -> Result<GradCheck>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {step}")));
    }
    if analytic.len() != point.len() {
        return Err(Error::Shape(format!(
            "gradient has {} entries, point has {}",
            analytic.len(),
            point.len()
        )));
    }

    let mut x = point.to_vec();
    let mut numeric = Vec::with_capacity(point.len());
    let mut max_rel_error = 0.0;
    let mut worst_index = None;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + step;
        let plus = f(&x)?;
        x[i] = orig - step;
        let minus = f(&x)?;
        x[i] = orig;
        if !(plus.is_finite() && minus.is_finite()) {
            return Err(Error::NonFinite(format!("objective near coordinate {i}")));
        }
        let num = (plus - minus) / (2.0 * step);
        let ana = analytic[i];
        let rel = (ana - num).abs() / 1f64.max(ana.abs()).max(num.abs());
        if worst_index.is_none() || rel > max_rel_error {
            max_rel_error = rel;
            worst_index = Some(i);
        }
        numeric.push(num);
    }
    Ok(GradCheck {
        max_rel_error,
        worst_index,
        numeric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn quadratic_is_exact() {
        let check = gradient_check(|x| Ok(x[0] * x[0]), &[6.0], &[3.0], 1e-5).unwrap();
        assert!((check.numeric[0] - 6.0).abs() < 1e-9);
        assert!(check.max_rel_error < 1e-9);
    }

    #[test]
    fn constant_function() {
        let check = gradient_check(|_| Ok(4.2), &[0.0, 0.0], &[1.0, -1.0], 1e-5).unwrap();
        assert_eq!(check.numeric, vec![0.0, 0.0]);
        assert_eq!(check.max_rel_error, 0.0);
    }

    #[test]
    fn random_quadratic_forms() {
        // f(x) = 0.5 x^T A x + b^T x with closed-form gradient A_sym x + b.
        let mut rng = Rng::new(99);
        for _ in 0..20 {
            let n = 1 + rng.below(5);
            let a: Vec<f64> = (0..n * n).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let x: Vec<f64> = (0..n).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let f = |x: &[f64]| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += 0.5 * x[i] * a[i * n + j] * x[j];
                    }
                    s += b[i] * x[i];
                }
                Ok(s)
            };
            let grad: Vec<f64> = (0..n)
                .map(|i| b[i] + (0..n).map(|j| 0.5 * (a[i * n + j] + a[j * n + i]) * x[j]).sum::<f64>())
                .collect();
            let check = gradient_check(f, &grad, &x, 1e-5).unwrap();
            assert!(check.max_rel_error < 1e-8, "{check:?}");
        }
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let check = gradient_check(|x| Ok(x[0] * x[0]), &[5.0], &[3.0], 1e-5).unwrap();
        assert!(check.max_rel_error > 0.1);
        assert_eq!(check.worst_index, Some(0));
    }

    #[test]
    fn errors() {
        assert!(gradient_check(|_| Ok(0.0), &[0.0], &[0.0], 0.0).is_err());
        assert!(gradient_check(|_| Ok(0.0), &[0.0], &[0.0, 1.0], 1e-5).is_err());
        assert!(matches!(
            gradient_check(|_| Ok(f64::NAN), &[0.0], &[0.0], 1e-5),
            Err(Error::NonFinite(_))
        ));
    }
}
