//! Transposed-convolution scenario generator trained by minimizing the
//! squared maximum mean discrepancy (MMD²) between encoded generated and
//! encoded real batches.
//!
//! Noise `[B, noise_dim]` passes through a 128-unit dense layer, is
//! reshaped to 32 channels of length 4, and three transposed convolutions
//! grow the length 4 → 13 → 40 → 81. The first 72 values form the scenario.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{epoch_batches, FrozenEncoder, LATENT_DIM};
use crate::dataset::SAMPLE_LEN;
use crate::error::{Error, Result};
use crate::nn::{tconv_output_len, Activation, Adam, AdamConfig, DenseLayer, Layer, Network, TConv1dLayer};
use crate::tensor::Tensor;

pub const DEFAULT_NOISE_DIM: usize = 100;
pub const DENSE_WIDTH: usize = 128;
/// Per-sample shape after the dense layer: `[channels, length]`.
pub const RESHAPE: [usize; 2] = [32, 4];
/// `(filters, kernel_len, stride)` for each transposed convolution.
pub const TCONV_SCHEDULE: [(usize, usize, usize); 3] = [(32, 4, 3), (16, 4, 3), (1, 3, 2)];
pub const RAW_OUTPUT_LEN: usize = 81;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioGenerator {
    net: Network,
    noise_dim: usize,
}

impl ScenarioGenerator {
    pub fn new(noise_dim: usize, seed: u64) -> Result<Self> {
        if noise_dim == 0 {
            return Err(Error::InvalidArgument("noise dimension must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = vec![
            Layer::Dense(DenseLayer::new(noise_dim, DENSE_WIDTH, Activation::Relu, rng.random())?),
            Layer::Reshape(RESHAPE.to_vec()),
        ];
        let mut channels = RESHAPE[0];
        for (i, &(filters, kernel, stride)) in TCONV_SCHEDULE.iter().enumerate() {
            let act = if i + 1 == TCONV_SCHEDULE.len() {
                Activation::Tanh
            } else {
                Activation::Relu
            };
            layers.push(Layer::TConv1d(TConv1dLayer::new(
                channels,
                filters,
                kernel,
                stride,
                act,
                rng.random(),
            )?));
            channels = filters;
        }
        layers.push(Layer::Crop(SAMPLE_LEN));
        Self::from_network(Network::new(layers))
    }

    /// Wraps a stored network after checking it has the expected structure.
    pub fn from_network(net: Network) -> Result<Self> {
        let bad = |msg: String| Err(Error::Shape(format!("generator: {msg}")));
        if net.layers.len() != 6 {
            return bad(format!("expected 6 layers, got {}", net.layers.len()));
        }
        let noise_dim = match &net.layers[0] {
            Layer::Dense(d) if d.out_dim() == DENSE_WIDTH && d.activation == Activation::Relu => d.in_dim(),
            other => return bad(format!("layer 0 must be dense ->{DENSE_WIDTH} relu, got {other:?}")),
        };
        if net.layers[1] != Layer::Reshape(RESHAPE.to_vec()) {
            return bad(format!("layer 1 must reshape to {RESHAPE:?}"));
        }
        let (mut channels, mut len) = (RESHAPE[0], RESHAPE[1]);
        for (i, &(filters, kernel, stride)) in TCONV_SCHEDULE.iter().enumerate() {
            let act = if i == 2 { Activation::Tanh } else { Activation::Relu };
            match &net.layers[2 + i] {
                Layer::TConv1d(t)
                    if t.in_channels() == channels
                        && t.out_channels() == filters
                        && t.kernel_len() == kernel
                        && t.stride == stride
                        && t.activation == act => {}
                other => return bad(format!("layer {} has unexpected structure {other:?}", 2 + i)),
            }
            channels = filters;
            len = tconv_output_len(len, kernel, stride);
        }
        if len != RAW_OUTPUT_LEN {
            return bad(format!("raw output length {len}, expected {RAW_OUTPUT_LEN}"));
        }
        if net.layers[5] != Layer::Crop(SAMPLE_LEN) {
            return bad(format!("layer 5 must keep the first {SAMPLE_LEN} values"));
        }
        Ok(Self { net, noise_dim })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    /// Sequence lengths through the convolution stack, starting at the reshape.
    pub fn length_chain(&self) -> Vec<usize> {
        let mut chain = vec![RESHAPE[1]];
        for layer in &self.net.layers {
            if let Layer::TConv1d(t) = layer {
                chain.push(t.output_len(*chain.last().unwrap()));
            }
        }
        chain
    }

    /// Scenarios in the normalized `[-1, 1]` space, shape `[B, 72]`.
    pub fn generate(&self, noise: &Tensor) -> Result<Tensor> {
        self.net.forward(noise)
    }
}

fn normal_tensor(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Result<Tensor> {
    let data = (0..count * dim).map(|_| rng.sample(StandardNormal)).collect();
    Tensor::new(vec![count, dim], data)
}

/// I.i.d. standard normal noise, deterministic per seed.
pub fn sample_noise(count: usize, noise_dim: usize, seed: u64) -> Result<Tensor> {
    if count == 0 || noise_dim == 0 {
        return Err(Error::InvalidArgument("noise count and dimension must be positive".into()));
    }
    normal_tensor(&mut ChaCha8Rng::seed_from_u64(seed), count, noise_dim)
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `exp(-‖x - y‖² / (2ν))`.
pub fn gaussian_kernel(x: &[f64], y: &[f64], bandwidth: f64) -> f64 {
    (-sq_dist(x, y) / (2.0 * bandwidth)).exp()
}

fn check_populations(generated: &Tensor, real: &Tensor, bandwidth: f64) -> Result<()> {
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {bandwidth}")));
    }
    if generated.shape().len() != 2 || generated.shape() != real.shape() {
        return Err(Error::Shape(format!(
            "mmd needs equally sized populations, got {:?} and {:?}",
            generated.shape(),
            real.shape()
        )));
    }
    Ok(())
}

/// Biased (V-statistic) MMD² with a Gaussian kernel, diagonal terms included.
/// Tiny negative round-off is clamped to zero.
pub fn mmd2(generated: &Tensor, real: &Tensor, bandwidth: f64) -> Result<f64> {
    Ok(mmd2_with_grad(generated, real, bandwidth)?.0)
}

/// MMD² together with its gradient with respect to `generated`.
pub fn mmd2_with_grad(generated: &Tensor, real: &Tensor, bandwidth: f64) -> Result<(f64, Tensor)> {
    check_populations(generated, real, bandwidth)?;
    let n = generated.rows();
    let m = real.rows();
    let d = generated.row_len();
    let (nf, mf) = (n as f64, m as f64);
    let mut grad = Tensor::zeros(generated.shape());

    let mut k_gg = 0.0;
    for i in 0..n {
        let gi = generated.row(i);
        k_gg += 1.0;
        for j in (i + 1)..n {
            let gj = generated.row(j);
            let k = gaussian_kernel(gi, gj, bandwidth);
            k_gg += 2.0 * k;
            // d/dg_i of (2/N²) k(g_i, g_j) = -(2/N²) k (g_i - g_j) / ν, and the mirror for g_j.
            let c = -2.0 * k / (nf * nf * bandwidth);
            for t in 0..d {
                let diff = gi[t] - gj[t];
                grad.data_mut()[i * d + t] += c * diff;
                grad.data_mut()[j * d + t] -= c * diff;
            }
        }
    }

    let mut k_gr = 0.0;
    for i in 0..n {
        let gi = generated.row(i);
        for j in 0..m {
            let rj = real.row(j);
            let k = gaussian_kernel(gi, rj, bandwidth);
            k_gr += k;
            let c = 2.0 * k / (nf * mf * bandwidth);
            for t in 0..d {
                grad.data_mut()[i * d + t] += c * (gi[t] - rj[t]);
            }
        }
    }

    let mut k_rr = 0.0;
    for i in 0..m {
        k_rr += 1.0;
        for j in (i + 1)..m {
            k_rr += 2.0 * gaussian_kernel(real.row(i), real.row(j), bandwidth);
        }
    }

    let value = k_gg / (nf * nf) - 2.0 * k_gr / (nf * mf) + k_rr / (mf * mf);
    Ok((value.max(0.0), grad))
}

/// Median of all pairwise squared Euclidean distances.
pub fn median_bandwidth(latents: &Tensor) -> Result<f64> {
    if latents.shape().len() != 2 || latents.rows() < 2 {
        return Err(Error::InvalidArgument("median heuristic needs at least 2 points".into()));
    }
    let k = latents.rows();
    let mut d = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in (i + 1)..k {
            d.push(sq_dist(latents.row(i), latents.row(j)));
        }
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    let median = if d.len() % 2 == 1 {
        d[mid]
    } else {
        0.5 * (d[mid - 1] + d[mid])
    };
    if !(median > 0.0) {
        return Err(Error::Data("median pairwise distance is zero; latents are degenerate".into()));
    }
    Ok(median)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    /// Median heuristic on the encoded training set.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub bandwidth: Bandwidth,
    pub seed: u64,
}

impl Default for GeneratorTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 32,
            learning_rate: 1e-3,
            bandwidth: Bandwidth::Auto,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorTraining {
    /// Sample-weighted mean MMD² per epoch.
    pub losses: Vec<f64>,
    pub bandwidth: f64,
}

/// Trains the generator against encoded real batches. Each real batch is
/// paired with an equally sized batch generated from fresh noise; the MMD²
/// gradient flows back through the frozen encoder into the generator only.
pub fn train_generator(
    gen: &mut ScenarioGenerator,
    encoder: &FrozenEncoder,
    train: &Tensor,
    cfg: &GeneratorTrainConfig,
) -> Result<GeneratorTraining> {
    if train.shape().len() != 2 || train.shape()[1] != SAMPLE_LEN || train.rows() < 2 {
        return Err(Error::Shape(format!(
            "training data must be [n >= 2, {SAMPLE_LEN}], got {:?}",
            train.shape()
        )));
    }
    if cfg.epochs == 0 || cfg.batch_size < 2 {
        return Err(Error::InvalidArgument("need epochs >= 1 and batch size >= 2".into()));
    }
    let real_latents = encoder.encode(train)?;
    debug_assert_eq!(real_latents.shape()[1], LATENT_DIM);
    let bandwidth = match cfg.bandwidth {
        Bandwidth::Auto => median_bandwidth(&real_latents)?,
        Bandwidth::Fixed(v) if v > 0.0 => v,
        Bandwidth::Fixed(v) => return Err(Error::InvalidArgument(format!("bandwidth {v} must be positive"))),
    };

    let mut opt = Adam::new(&gen.net, AdamConfig::with_learning_rate(cfg.learning_rate));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut total = 0.0;
        let mut counted = 0usize;
        for batch_idx in epoch_batches(train.rows(), cfg.batch_size, &mut rng) {
            let m = batch_idx.len();
            if m < 2 {
                continue;
            }
            let real = real_latents.select_rows(&batch_idx)?;
            let noise = normal_tensor(&mut rng, m, gen.noise_dim)?;
            let gen_trace = gen.net.forward_trace(&noise)?;
            let enc_trace = encoder.forward_trace(gen_trace.output())?;
            let (loss, d_latent) = mmd2_with_grad(enc_trace.output(), &real, bandwidth)?;
            if !loss.is_finite() {
                return Err(Error::Divergence(format!("MMD loss {loss} at epoch {epoch}")));
            }
            let d_scenario = encoder.input_gradient(&enc_trace, &d_latent)?;
            let grads = gen.net.backward(&gen_trace, &d_scenario)?;
            opt.step(&mut gen.net, &grads.params).map_err(|e| match e {
                Error::NonFinite(msg) => Error::Divergence(msg),
                other => other,
            })?;
            total += loss * m as f64;
            counted += m;
        }
        losses.push(total / counted as f64);
    }
    Ok(GeneratorTraining { losses, bandwidth })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random(rows: usize, cols: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::new(vec![rows, cols], data).unwrap()
    }

    #[test]
    fn structure_and_length_chain() {
        let g = ScenarioGenerator::new(DEFAULT_NOISE_DIM, 0).unwrap();
        assert_eq!(g.length_chain(), vec![4, 13, 40, 81]);
        let filters: Vec<usize> = g
            .network()
            .layers
            .iter()
            .filter_map(|l| match l {
                Layer::TConv1d(t) => Some(t.out_channels()),
                _ => None,
            })
            .collect();
        assert_eq!(filters, vec![32, 16, 1]);
        assert!(ScenarioGenerator::new(0, 0).is_err());
    }

    #[test]
    fn generate_shape_range_determinism() {
        let g = ScenarioGenerator::new(8, 1).unwrap();
        for b in [1, 7] {
            let z = sample_noise(b, 8, 3).unwrap();
            let x = g.generate(&z).unwrap();
            assert_eq!(x.shape(), &[b, SAMPLE_LEN]);
            assert!(x.data().iter().all(|v| v.abs() < 1.0));
            assert_eq!(x, g.generate(&z).unwrap());
        }
        assert!(g.generate(&Tensor::zeros(&[2, 9])).is_err());
    }

    #[test]
    fn noise_moments() {
        let z = sample_noise(100_000, 1, 42).unwrap();
        let n = z.len() as f64;
        let mean = z.data().iter().sum::<f64>() / n;
        let var = z.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.02, "{mean}");
        assert!((var - 1.0).abs() < 0.02, "{var}");
        assert_eq!(sample_noise(5, 3, 1).unwrap(), sample_noise(5, 3, 1).unwrap());
    }

    #[test]
    fn kernel_identities() {
        let x = [0.3, -1.0];
        let y = [1.3, 0.0];
        assert_eq!(gaussian_kernel(&x, &x, 0.7), 1.0);
        // ‖x-y‖² = 2 = 2ν with ν = 1.
        assert!((gaussian_kernel(&x, &y, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(gaussian_kernel(&x, &y, 0.4), gaussian_kernel(&y, &x, 0.4));
    }

    #[test]
    fn mmd_identical_populations_vanish() {
        let x = random(6, 16, 1);
        assert!(mmd2(&x, &x, 1.5).unwrap().abs() < 1e-12);
    }

    #[test]
    fn mmd_rejects_unequal_populations_or_bad_bandwidth() {
        assert!(mmd2(&random(3, 2, 1), &random(4, 2, 2), 1.0).is_err());
        assert!(mmd2(&random(3, 2, 1), &random(3, 2, 2), 0.0).is_err());
    }

    #[test]
    fn mmd_singleton_closed_form() {
        let a = Tensor::from_rows(&[[0.2, -0.4, 1.0]]).unwrap();
        let b = Tensor::from_rows(&[[-0.5, 0.1, 0.3]]).unwrap();
        let d2: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
        let nu = 0.65;
        let expected = 2.0 - 2.0 * (-d2 / (2.0 * nu)).exp();
        assert!((mmd2(&a, &b, nu).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn mmd_symmetric_and_order_invariant() {
        let a = random(5, 3, 7);
        let b = random(5, 3, 8);
        let ab = mmd2(&a, &b, 0.9).unwrap();
        assert!((ab - mmd2(&b, &a, 0.9).unwrap()).abs() < 1e-14);
        let ap = a.select_rows(&[4, 2, 0, 1, 3]).unwrap();
        assert!((ab - mmd2(&ap, &b, 0.9).unwrap()).abs() < 1e-14);
        assert!(ab >= 0.0);
    }

    #[test]
    fn mmd_gradient_matches_finite_differences() {
        use crate::nn::{gradient_check, DEFAULT_EPS};
        let a = random(4, 3, 11);
        let b = random(4, 3, 12);
        let (_, g) = mmd2_with_grad(&a, &b, 0.8).unwrap();
        let err = gradient_check(|p| mmd2(p, &b, 0.8).unwrap(), &a, &g, DEFAULT_EPS).unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn median_bandwidth_cases() {
        let two = Tensor::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        assert_eq!(median_bandwidth(&two).unwrap(), 1.0);
        let dup = Tensor::from_rows(&[[0.5, 0.5], [0.5, 0.5], [0.5, 0.5]]).unwrap();
        assert!(median_bandwidth(&dup).is_err());
        assert!(median_bandwidth(&random(1, 3, 0)).is_err());
    }
}
