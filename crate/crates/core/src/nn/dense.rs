use super::activation::Activation;
use super::init::glorot_init;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Fully connected layer: `activation(input · weights + bias)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation, seed: u64) -> Result<Self> {
        Ok(Self {
            weights: glorot_init(in_dim, out_dim, seed)?,
            bias: Tensor::zeros(&[out_dim]),
            activation,
        })
    }

    pub fn from_parts(weights: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        if weights.shape().len() != 2 {
            return Err(Error::Shape(format!(
                "dense weights must be 2-d, got {:?}",
                weights.shape()
            )));
        }
        bias.ensure_shape(&[weights.shape()[1]], "dense bias")?;
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let (n_in, n_out) = (self.in_dim(), self.out_dim());
        if input.shape().len() != 2 || input.shape()[1] != n_in {
            return Err(Error::Shape(format!(
                "dense layer expects [batch, {n_in}], got {:?}",
                input.shape()
            )));
        }
        let batch = input.rows();
        let w = self.weights.data();
        let mut out = Vec::with_capacity(batch * n_out);
        for b in 0..batch {
            let mut acc = self.bias.data().to_vec();
            for (i, &x) in input.row(b).iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                let w_row = &w[i * n_out..(i + 1) * n_out];
                for (a, &wv) in acc.iter_mut().zip(w_row) {
                    *a += x * wv;
                }
            }
            out.extend(acc.into_iter().map(|z| self.activation.apply(z)));
        }
        Tensor::new(vec![batch, n_out], out)
    }

    /// Reverse pass given the forward input, the forward output and the
    /// gradient of the loss with respect to that output.
    ///
    /// Returns `(d_weights, d_bias, d_input)`.
    pub fn backward(
        &self,
        input: &Tensor,
        output: &Tensor,
        grad_output: &Tensor,
    ) -> Result<(Tensor, Tensor, Tensor)> {
        let (n_in, n_out) = (self.in_dim(), self.out_dim());
        let batch = input.rows();
        grad_output.ensure_shape(&[batch, n_out], "dense upstream gradient")?;
        output.ensure_shape(&[batch, n_out], "dense output")?;

        let w = self.weights.data();
        let mut d_w = vec![0.0; n_in * n_out];
        let mut d_b = vec![0.0; n_out];
        let mut d_x = vec![0.0; batch * n_in];
        let mut dz = vec![0.0; n_out];
        for b in 0..batch {
            for ((d, &g), &y) in dz.iter_mut().zip(grad_output.row(b)).zip(output.row(b)) {
                *d = g * self.activation.derivative_from_output(y);
            }
            for (db, &d) in d_b.iter_mut().zip(&dz) {
                *db += d;
            }
            let x_row = input.row(b);
            for i in 0..n_in {
                let w_row = &w[i * n_out..(i + 1) * n_out];
                let dw_row = &mut d_w[i * n_out..(i + 1) * n_out];
                let x = x_row[i];
                let mut dot = 0.0;
                for ((dwv, &wv), &d) in dw_row.iter_mut().zip(w_row).zip(&dz) {
                    *dwv += x * d;
                    dot += wv * d;
                }
                d_x[b * n_in + i] = dot;
            }
        }
        Ok((
            Tensor::new(vec![n_in, n_out], d_w)?,
            Tensor::new(vec![n_out], d_b)?,
            Tensor::new(vec![batch, n_in], d_x)?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(n: usize) -> Tensor {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data_mut()[i * n + i] = 1.0;
        }
        t
    }

    #[test]
    fn identity_weights_pass_input_through() {
        let layer = DenseLayer::from_parts(identity(3), Tensor::zeros(&[3]), Activation::Identity).unwrap();
        let x = Tensor::from_rows(&[[1.5, -2.0, 0.25], [0.0, 3.0, -1.0]]).unwrap();
        assert_eq!(layer.forward(&x).unwrap(), x);
    }

    #[test]
    fn relu_clips_negative() {
        let layer = DenseLayer::from_parts(identity(2), Tensor::zeros(&[2]), Activation::Relu).unwrap();
        let x = Tensor::from_rows(&[[-1.0, 2.0]]).unwrap();
        assert_eq!(layer.forward(&x).unwrap().data(), &[0.0, 2.0]);
    }

    #[test]
    fn tanh_hand_arithmetic() {
        let w = Tensor::new(vec![2, 1], vec![1.0, 1.0]).unwrap();
        let b = Tensor::new(vec![1], vec![0.5]).unwrap();
        let layer = DenseLayer::from_parts(w, b, Activation::Tanh).unwrap();
        let x = Tensor::from_rows(&[[1.0, 1.0]]).unwrap();
        assert_eq!(layer.forward(&x).unwrap().data(), &[2.5f64.tanh()]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let layer = DenseLayer::new(4, 2, Activation::Relu, 0).unwrap();
        let x = Tensor::zeros(&[3, 5]);
        assert!(matches!(layer.forward(&x), Err(Error::Shape(_))));
        assert!(DenseLayer::from_parts(identity(2), Tensor::zeros(&[3]), Activation::Relu).is_err());
    }

    #[test]
    fn linear_weight_gradient_is_input_transpose_times_upstream() {
        let layer = DenseLayer::from_parts(identity(2), Tensor::zeros(&[2]), Activation::Identity).unwrap();
        let x = Tensor::from_rows(&[[1.0, 2.0], [3.0, -1.0]]).unwrap();
        let y = layer.forward(&x).unwrap();
        let g = Tensor::from_rows(&[[0.5, -1.0], [2.0, 1.0]]).unwrap();
        let (dw, db, dx) = layer.backward(&x, &y, &g).unwrap();
        // xᵀ·g
        assert_eq!(dw.data(), &[1.0 * 0.5 + 3.0 * 2.0, -1.0 + 3.0, 2.0 * 0.5 - 2.0, -2.0 - 1.0]);
        assert_eq!(db.data(), &[2.5, 0.0]);
        assert_eq!(dx, g);
    }
}
