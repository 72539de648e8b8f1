use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_EPS: f64 = 1e-5;

/// Compares an analytic gradient against central finite differences and
/// returns the largest `|analytic - numeric| / max(1, |analytic| + |numeric|)`.
pub fn gradient_check(
    loss_fn: impl FnMut(&Tensor) -> f64,
    params: &Tensor,
    analytic: &Tensor,
    eps: f64,
) -> Result<f64> {
    let coords: Vec<usize> = (0..params.len()).collect();
    gradient_check_coords(loss_fn, params, analytic, eps, &coords)
}

/// Like [`gradient_check`], restricted to the given flat coordinates.
pub fn gradient_check_coords(
    mut loss_fn: impl FnMut(&Tensor) -> f64,
    params: &Tensor,
    analytic: &Tensor,
    eps: f64,
    coords: &[usize],
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if params.len() != analytic.len() {
        return Err(Error::Shape(format!(
            "{} parameters but {} gradient entries",
            params.len(),
            analytic.len()
        )));
    }
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for &i in coords {
        if i >= params.len() {
            return Err(Error::Shape(format!("coordinate {i} out of range")));
        }
        let orig = params.data()[i];
        probe.data_mut()[i] = orig + eps;
        let plus = loss_fn(&probe);
        probe.data_mut()[i] = orig - eps;
        let minus = loss_fn(&probe);
        probe.data_mut()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!("loss at coordinate {i} is not finite")));
        }
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic.data()[i];
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1.0);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let p = Tensor::new(vec![4], vec![0.3, -1.2, 2.0, 0.0]).unwrap();
        let err = gradient_check(|q| 0.5 * q.sum_sq(), &p, &p, DEFAULT_EPS).unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn detects_wrong_gradient() {
        let p = Tensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let wrong = Tensor::new(vec![2], vec![1.0, 3.0]).unwrap();
        let err = gradient_check(|q| 0.5 * q.sum_sq(), &p, &wrong, DEFAULT_EPS).unwrap();
        assert!(err > 0.1);
    }

    #[test]
    fn nan_loss_rejected() {
        let p = Tensor::new(vec![1], vec![1.0]).unwrap();
        assert!(matches!(
            gradient_check(|_| f64::NAN, &p, &p, DEFAULT_EPS),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn nonpositive_eps_rejected() {
        let p = Tensor::new(vec![1], vec![1.0]).unwrap();
        assert!(gradient_check(|q| q.sum_sq(), &p, &p, 0.0).is_err());
    }
}
