use crate::error::{Error, Result};

/// Mean squared error and its gradient with respect to `predicted`.
pub fn mse_loss(predicted: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if predicted.len() != target.len() {
        return Err(Error::Shape(format!(
            "predicted has {} entries, target {}",
            predicted.len(),
            target.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::Empty("loss input"));
    }
    let n = predicted.len() as f64;
    let mut loss = 0.0;
    let grad = predicted
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    let loss = loss / n;
    if !loss.is_finite() {
        return Err(Error::NonFinite("mse loss".into()));
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{gradient_check, Rng};

    #[test]
    fn equal_inputs_give_zero() {
        let (l, g) = mse_loss(&[0.3, 0.7], &[0.3, 0.7]).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn hand_value() {
        let (l, g) = mse_loss(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(l, 0.5);
        assert_eq!(g, vec![1.0, 0.0]);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(mse_loss(&[1.0], &[1.0, 2.0]), Err(Error::Shape(_))));
        assert!(mse_loss(&[], &[]).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = Rng::new(21);
        for _ in 0..10 {
            let n = 1 + rng.below(6);
            let p: Vec<f64> = (0..n).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let t: Vec<f64> = (0..n).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let (_, grad) = mse_loss(&p, &t).unwrap();
            let check = gradient_check(|x| Ok(mse_loss(x, &t)?.0), &grad, &p, 1e-5).unwrap();
            assert!(check.max_rel_error < 1e-8, "{check:?}");
        }
    }
}
