//! Minimal neural-network engine: dense and 1-d transposed-convolution
//! layers with hand-written reverse passes, Adam, and finite-difference
//! gradient checking.

mod activation;
mod adam;
mod dense;
mod gradcheck;
mod init;
mod tconv;

pub use activation::Activation;
pub use adam::{adam_step, Adam, AdamConfig, AdamState};
pub use dense::DenseLayer;
pub use gradcheck::{gradient_check, gradient_check_coords, DEFAULT_EPS};
pub use init::{glorot_init, glorot_uniform};
pub use tconv::{tconv_output_len, TConv1dLayer};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A network layer. Reshape and crop are parameter-free plumbing between
/// the dense and convolutional stages.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(DenseLayer),
    TConv1d(TConv1dLayer),
    /// Reshapes each sample to the given per-sample shape.
    Reshape(Vec<usize>),
    /// Keeps the first `n` values of each flattened sample, yielding `[batch, n]`.
    Crop(usize),
}

impl Layer {
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Dense(l) => l.forward(input),
            Layer::TConv1d(l) => l.forward(input),
            Layer::Reshape(shape) => {
                let mut full = vec![input.rows()];
                full.extend_from_slice(shape);
                input.clone().reshape(full)
            }
            Layer::Crop(n) => {
                let width = input.row_len();
                if *n > width {
                    return Err(Error::Shape(format!("cannot crop {width} values to {n}")));
                }
                let mut data = Vec::with_capacity(input.rows() * n);
                for b in 0..input.rows() {
                    data.extend_from_slice(&input.row(b)[..*n]);
                }
                Tensor::new(vec![input.rows(), *n], data)
            }
        }
    }

    /// Returns parameter gradients (in `params()` order) and the input gradient.
    fn backward(&self, input: &Tensor, output: &Tensor, grad: &Tensor) -> Result<(Vec<Tensor>, Tensor)> {
        match self {
            Layer::Dense(l) => {
                let (dw, db, dx) = l.backward(input, output, grad)?;
                Ok((vec![dw, db], dx))
            }
            Layer::TConv1d(l) => {
                let (dk, db, dx) = l.backward(input, output, grad)?;
                Ok((vec![dk, db], dx))
            }
            Layer::Reshape(_) => {
                grad.ensure_shape(output.shape(), "reshape upstream gradient")?;
                Ok((Vec::new(), grad.clone().reshape(input.shape().to_vec())?))
            }
            Layer::Crop(n) => {
                grad.ensure_shape(&[input.rows(), *n], "crop upstream gradient")?;
                let mut dx = Tensor::zeros(input.shape());
                for b in 0..input.rows() {
                    dx.row_mut(b)[..*n].copy_from_slice(grad.row(b));
                }
                Ok((Vec::new(), dx))
            }
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Dense(l) => vec![&l.weights, &l.bias],
            Layer::TConv1d(l) => vec![&l.kernels, &l.bias],
            Layer::Reshape(_) | Layer::Crop(_) => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Dense(l) => vec![&mut l.weights, &mut l.bias],
            Layer::TConv1d(l) => vec![&mut l.kernels, &mut l.bias],
            Layer::Reshape(_) | Layer::Crop(_) => Vec::new(),
        }
    }

    fn param_names(&self) -> &'static [&'static str] {
        match self {
            Layer::Dense(_) => &["weights", "bias"],
            Layer::TConv1d(_) => &["kernels", "bias"],
            Layer::Reshape(_) | Layer::Crop(_) => &[],
        }
    }
}

/// Activations recorded by a forward pass, `values[0]` being the input.
#[derive(Debug, Clone)]
pub struct Trace {
    pub values: Vec<Tensor>,
}

impl Trace {
    pub fn output(&self) -> &Tensor {
        self.values.last().expect("trace holds at least the input")
    }
}

/// Exact reverse-mode gradients of a network.
#[derive(Debug, Clone)]
pub struct Gradients {
    /// One tensor per parameter, in `Network::params()` order.
    pub params: Vec<Tensor>,
    pub input: Tensor,
}

/// An ordered stack of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let mut x = input.clone();
        for layer in &self.layers {
            x = layer.forward(&x)?;
        }
        Ok(x)
    }

    pub fn forward_trace(&self, input: &Tensor) -> Result<Trace> {
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(input.clone());
        for layer in &self.layers {
            let next = layer.forward(values.last().unwrap())?;
            values.push(next);
        }
        Ok(Trace { values })
    }

    pub fn backward(&self, trace: &Trace, grad_output: &Tensor) -> Result<Gradients> {
        if trace.values.len() != self.layers.len() + 1 {
            return Err(Error::Shape("trace does not belong to this network".into()));
        }
        grad_output.ensure_shape(trace.output().shape(), "loss gradient at output")?;
        let mut grad = grad_output.clone();
        let mut per_layer = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (pg, dx) = layer.backward(&trace.values[i], &trace.values[i + 1], &grad)?;
            per_layer.push(pg);
            grad = dx;
        }
        per_layer.reverse();
        Ok(Gradients {
            params: per_layer.into_iter().flatten().collect(),
            input: grad,
        })
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    /// Parameters keyed as `<prefix>.<layer index>.<name>`.
    pub fn named_params(&self, prefix: &str) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            for (name, t) in layer.param_names().iter().zip(layer.params()) {
                out.push((format!("{prefix}.{i}.{name}"), t));
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// All parameters concatenated into one flat vector.
    pub fn flat_params(&self) -> Vec<f64> {
        self.params().iter().flat_map(|t| t.data().iter().copied()).collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for p in self.params_mut() {
            let n = p.len();
            p.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }
}

/// Forward pass followed by the reverse pass for `loss_grad` at the output.
pub fn backprop(network: &Network, input: &Tensor, loss_grad: &Tensor) -> Result<Gradients> {
    let trace = network.forward_trace(input)?;
    network.backward(&trace, loss_grad)
}

/// Concatenates per-parameter gradients into one flat vector.
pub fn flatten(tensors: &[Tensor]) -> Vec<f64> {
    tensors.iter().flat_map(|t| t.data().iter().copied()).collect()
}
