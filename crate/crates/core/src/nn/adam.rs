use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::Network;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Tensor,
    pub second_moment: Tensor,
    pub step_count: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(shape: &[usize], config: AdamConfig) -> Self {
        Self {
            first_moment: Tensor::zeros(shape),
            second_moment: Tensor::zeros(shape),
            step_count: 0,
            config,
        }
    }
}

/// One bias-corrected Adam update of `param` in place.
pub fn adam_step(param: &mut Tensor, grad: &Tensor, state: &mut AdamState) -> Result<()> {
    if param.shape() != grad.shape() || param.shape() != state.first_moment.shape() {
        return Err(Error::Shape(format!(
            "adam: param {:?}, grad {:?}, state {:?}",
            param.shape(),
            grad.shape(),
            state.first_moment.shape()
        )));
    }
    grad.ensure_finite("adam gradient")?;

    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);

    let m = state.first_moment.data_mut();
    let v = state.second_moment.data_mut();
    for (((p, &g), m), v) in param.data_mut().iter_mut().zip(grad.data()).zip(m).zip(v) {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
    }
    Ok(())
}

/// Adam over every parameter of a network.
#[derive(Debug, Clone)]
pub struct Adam {
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new(network: &Network, config: AdamConfig) -> Self {
        Self {
            states: network
                .params()
                .iter()
                .map(|p| AdamState::new(p.shape(), config))
                .collect(),
        }
    }

    pub fn step(&mut self, network: &mut Network, grads: &[Tensor]) -> Result<()> {
        if grads.len() != self.states.len() {
            return Err(Error::Shape(format!(
                "adam: {} gradients for {} parameters",
                grads.len(),
                self.states.len()
            )));
        }
        // Validate everything first so a bad gradient leaves the network untouched.
        for g in grads {
            g.ensure_finite("adam gradient")?;
        }
        for ((p, g), s) in network.params_mut().into_iter().zip(grads).zip(&mut self.states) {
            adam_step(p, g, s)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor {
        Tensor::new(vec![1], vec![v]).unwrap()
    }

    #[test]
    fn first_step_is_bias_corrected() {
        let mut p = scalar(0.5);
        let mut s = AdamState::new(&[1], AdamConfig::default());
        adam_step(&mut p, &scalar(1.0), &mut s).unwrap();
        let expected = 0.5 - 0.001 * 1.0 / (1.0 + 1e-8);
        assert!((p.data()[0] - expected).abs() < 1e-15);
        assert_eq!(s.step_count, 1);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut p = Tensor::new(vec![3], vec![1.0, -2.0, 0.3]).unwrap();
        let before = p.clone();
        let mut s = AdamState::new(&[3], AdamConfig::default());
        for i in 0..20 {
            adam_step(&mut p, &Tensor::zeros(&[3]), &mut s).unwrap();
            assert_eq!(s.step_count, i + 1);
        }
        assert_eq!(p, before);
    }

    #[test]
    fn equal_inputs_update_identically() {
        let mut a = scalar(0.2);
        let mut b = scalar(0.2);
        let mut sa = AdamState::new(&[1], AdamConfig::default());
        let mut sb = sa.clone();
        for g in [0.3, -1.0, 2.5] {
            adam_step(&mut a, &scalar(g), &mut sa).unwrap();
            adam_step(&mut b, &scalar(g), &mut sb).unwrap();
        }
        assert_eq!(a, b);
        assert!(sa.second_moment.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn nan_gradient_rejected() {
        let mut p = scalar(0.0);
        let mut s = AdamState::new(&[1], AdamConfig::default());
        let err = adam_step(&mut p, &scalar(f64::NAN), &mut s).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert_eq!(s.step_count, 0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = scalar(0.0);
        let mut s = AdamState::new(&[1], AdamConfig::default());
        assert!(adam_step(&mut p, &Tensor::zeros(&[2]), &mut s).is_err());
    }
}
