use super::activation::Activation;
use super::init::glorot_uniform;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One-dimensional transposed convolution without padding or cropping.
///
/// Input `[batch, in_channels, len]` maps to
/// `[batch, out_channels, (len - 1) * stride + kernel_len]`; input position
/// `i` scatters `x[i] * kernel` onto output positions `i * stride ..`.
#[derive(Debug, Clone, PartialEq)]
pub struct TConv1dLayer {
    /// `[in_channels, out_channels, kernel_len]`
    pub kernels: Tensor,
    pub bias: Tensor,
    pub stride: usize,
    pub activation: Activation,
}

pub fn tconv_output_len(input_len: usize, kernel_len: usize, stride: usize) -> usize {
    (input_len - 1) * stride + kernel_len
}

impl TConv1dLayer {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel_len: usize,
        stride: usize,
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidArgument("stride must be positive".into()));
        }
        let kernels = glorot_uniform(
            &[in_channels, out_channels, kernel_len],
            in_channels * kernel_len,
            out_channels * kernel_len,
            seed,
        )?;
        Ok(Self {
            kernels,
            bias: Tensor::zeros(&[out_channels]),
            stride,
            activation,
        })
    }

    pub fn from_parts(kernels: Tensor, bias: Tensor, stride: usize, activation: Activation) -> Result<Self> {
        if kernels.shape().len() != 3 {
            return Err(Error::Shape(format!(
                "tconv kernels must be 3-d, got {:?}",
                kernels.shape()
            )));
        }
        if stride == 0 {
            return Err(Error::InvalidArgument("stride must be positive".into()));
        }
        bias.ensure_shape(&[kernels.shape()[1]], "tconv bias")?;
        Ok(Self {
            kernels,
            bias,
            stride,
            activation,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn kernel_len(&self) -> usize {
        self.kernels.shape()[2]
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        tconv_output_len(input_len, self.kernel_len(), self.stride)
    }

    fn check_input(&self, input: &Tensor) -> Result<(usize, usize)> {
        let s = input.shape();
        if s.len() != 3 || s[1] != self.in_channels() {
            return Err(Error::Shape(format!(
                "tconv expects [batch, {}, len], got {s:?}",
                self.in_channels()
            )));
        }
        Ok((s[0], s[2]))
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let (batch, len_in) = self.check_input(input)?;
        let (c_in, c_out, k) = (self.in_channels(), self.out_channels(), self.kernel_len());
        let len_out = self.output_len(len_in);
        let kern = self.kernels.data();
        let mut out = vec![0.0; batch * c_out * len_out];
        for b in 0..batch {
            let x = input.row(b);
            let y = &mut out[b * c_out * len_out..(b + 1) * c_out * len_out];
            for o in 0..c_out {
                y[o * len_out..(o + 1) * len_out].fill(self.bias.data()[o]);
            }
            for c in 0..c_in {
                for i in 0..len_in {
                    let xv = x[c * len_in + i];
                    if xv == 0.0 {
                        continue;
                    }
                    for o in 0..c_out {
                        let kv = &kern[(c * c_out + o) * k..(c * c_out + o + 1) * k];
                        let start = o * len_out + i * self.stride;
                        for (yv, &w) in y[start..start + k].iter_mut().zip(kv) {
                            *yv += xv * w;
                        }
                    }
                }
            }
            for v in y.iter_mut() {
                *v = self.activation.apply(*v);
            }
        }
        Tensor::new(vec![batch, c_out, len_out], out)
    }

    /// Returns `(d_kernels, d_bias, d_input)`.
    pub fn backward(
        &self,
        input: &Tensor,
        output: &Tensor,
        grad_output: &Tensor,
    ) -> Result<(Tensor, Tensor, Tensor)> {
        let (batch, len_in) = self.check_input(input)?;
        let (c_in, c_out, k) = (self.in_channels(), self.out_channels(), self.kernel_len());
        let len_out = self.output_len(len_in);
        grad_output.ensure_shape(&[batch, c_out, len_out], "tconv upstream gradient")?;
        output.ensure_shape(&[batch, c_out, len_out], "tconv output")?;

        let kern = self.kernels.data();
        let mut d_k = vec![0.0; c_in * c_out * k];
        let mut d_b = vec![0.0; c_out];
        let mut d_x = vec![0.0; batch * c_in * len_in];
        let mut dz = vec![0.0; c_out * len_out];
        for b in 0..batch {
            for ((d, &g), &y) in dz.iter_mut().zip(grad_output.row(b)).zip(output.row(b)) {
                *d = g * self.activation.derivative_from_output(y);
            }
            for o in 0..c_out {
                d_b[o] += dz[o * len_out..(o + 1) * len_out].iter().sum::<f64>();
            }
            let x = input.row(b);
            let dx = &mut d_x[b * c_in * len_in..(b + 1) * c_in * len_in];
            for c in 0..c_in {
                for i in 0..len_in {
                    let xv = x[c * len_in + i];
                    let mut acc = 0.0;
                    for o in 0..c_out {
                        let base = (c * c_out + o) * k;
                        let start = o * len_out + i * self.stride;
                        let dz_win = &dz[start..start + k];
                        for t in 0..k {
                            d_k[base + t] += xv * dz_win[t];
                            acc += kern[base + t] * dz_win[t];
                        }
                    }
                    dx[c * len_in + i] = acc;
                }
            }
        }
        Ok((
            Tensor::new(vec![c_in, c_out, k], d_k)?,
            Tensor::new(vec![c_out], d_b)?,
            Tensor::new(vec![batch, c_in, len_in], d_x)?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(kernel: &[f64], stride: usize) -> TConv1dLayer {
        TConv1dLayer::from_parts(
            Tensor::new(vec![1, 1, kernel.len()], kernel.to_vec()).unwrap(),
            Tensor::zeros(&[1]),
            stride,
            Activation::Identity,
        )
        .unwrap()
    }

    #[test]
    fn impulse_copies_kernel() {
        let layer = single(&[1.0, 1.0, 1.0], 1);
        let x = Tensor::new(vec![1, 1, 1], vec![1.0]).unwrap();
        assert_eq!(layer.forward(&x).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn strided_placement() {
        let layer = single(&[1.0, 2.0], 2);
        let x = Tensor::new(vec![1, 1, 2], vec![1.0, 0.0]).unwrap();
        let y = layer.forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 4]);
        assert_eq!(y.data(), &[1.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn output_length_formula() {
        assert_eq!(tconv_output_len(4, 4, 3), 13);
        assert_eq!(tconv_output_len(13, 4, 3), 40);
        assert_eq!(tconv_output_len(40, 3, 2), 81);
    }

    /// Direct scatter oracle: out[i*s + t] += x[i] * k[t].
    fn scatter_oracle(x: &[f64], k: &[f64], s: usize) -> Vec<f64> {
        let mut out = vec![0.0; (x.len() - 1) * s + k.len()];
        for (i, &xv) in x.iter().enumerate() {
            for (t, &kv) in k.iter().enumerate() {
                out[i * s + t] += xv * kv;
            }
        }
        out
    }

    #[test]
    fn channel_mismatch_rejected() {
        let layer = TConv1dLayer::new(2, 3, 3, 2, Activation::Relu, 1).unwrap();
        assert!(layer.forward(&Tensor::zeros(&[1, 3, 4])).is_err());
        assert!(layer.forward(&Tensor::zeros(&[1, 2, 4])).is_ok());
    }

    proptest! {
        #[test]
        fn length_law_and_scatter(
            x in proptest::collection::vec(-2.0f64..2.0, 1..8),
            k in proptest::collection::vec(-2.0f64..2.0, 1..6),
            s in 1usize..5,
        ) {
            let layer = single(&k, s);
            let input = Tensor::new(vec![1, 1, x.len()], x.clone()).unwrap();
            let y = layer.forward(&input).unwrap();
            prop_assert_eq!(y.shape()[2], (x.len() - 1) * s + k.len());
            let expected = scatter_oracle(&x, &k, s);
            for (a, b) in y.data().iter().zip(&expected) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
