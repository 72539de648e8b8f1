//! Dense auto-encoder that compresses 72-value daily curves to a
//! 16-dimensional latent space.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::SAMPLE_LEN;
use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, AdamConfig, DenseLayer, Layer, Network, Trace};
use crate::tensor::Tensor;

pub const LATENT_DIM: usize = 16;
/// Output widths of the encoder layers.
pub const ENCODER_WIDTHS: [usize; 3] = [64, 32, LATENT_DIM];
/// Output widths of the decoder layers.
pub const DECODER_WIDTHS: [usize; 4] = [16, 32, 64, SAMPLE_LEN];

#[derive(Debug, Clone, PartialEq)]
pub struct AutoEncoder {
    encoder: Network,
    decoder: Network,
    trained: bool,
}

fn dense_stack(input: usize, widths: &[usize], head: Activation, rng: &mut ChaCha8Rng) -> Result<Network> {
    let mut layers = Vec::with_capacity(widths.len());
    let mut prev = input;
    for (i, &w) in widths.iter().enumerate() {
        let act = if i + 1 == widths.len() { head } else { Activation::Relu };
        layers.push(Layer::Dense(DenseLayer::new(prev, w, act, rng.random())?));
        prev = w;
    }
    Ok(Network::new(layers))
}

fn check_stack(net: &Network, input: usize, widths: &[usize], head: Activation, what: &str) -> Result<()> {
    if net.layers.len() != widths.len() {
        return Err(Error::Shape(format!(
            "{what} needs {} dense layers, got {}",
            widths.len(),
            net.layers.len()
        )));
    }
    let mut prev = input;
    for (i, (layer, &w)) in net.layers.iter().zip(widths).enumerate() {
        let want_act = if i + 1 == widths.len() { head } else { Activation::Relu };
        match layer {
            Layer::Dense(d) if d.in_dim() == prev && d.out_dim() == w && d.activation == want_act => {}
            other => {
                return Err(Error::Shape(format!(
                    "{what} layer {i}: expected dense {prev}->{w} {want_act:?}, got {other:?}"
                )))
            }
        }
        prev = w;
    }
    Ok(())
}

impl AutoEncoder {
    pub fn new(seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            encoder: dense_stack(SAMPLE_LEN, &ENCODER_WIDTHS, Activation::Relu, &mut rng)?,
            decoder: dense_stack(LATENT_DIM, &DECODER_WIDTHS, Activation::Tanh, &mut rng)?,
            trained: false,
        })
    }

    /// Rebuilds an auto-encoder from stored networks, checking the architecture.
    pub fn from_networks(encoder: Network, decoder: Network, trained: bool) -> Result<Self> {
        check_stack(&encoder, SAMPLE_LEN, &ENCODER_WIDTHS, Activation::Relu, "encoder")?;
        check_stack(&decoder, LATENT_DIM, &DECODER_WIDTHS, Activation::Tanh, "decoder")?;
        Ok(Self {
            encoder,
            decoder,
            trained,
        })
    }

    pub fn encoder(&self) -> &Network {
        &self.encoder
    }

    pub fn decoder(&self) -> &Network {
        &self.decoder
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn encode(&self, batch: &Tensor) -> Result<Tensor> {
        self.encoder.forward(batch)
    }

    pub fn decode(&self, latents: &Tensor) -> Result<Tensor> {
        self.decoder.forward(latents)
    }

    pub fn reconstruct(&self, batch: &Tensor) -> Result<Tensor> {
        self.decode(&self.encode(batch)?)
    }

    /// Hands out the encoder for generator training. Only a trained
    /// auto-encoder can be frozen.
    pub fn freeze_encoder(&self) -> Result<FrozenEncoder> {
        if !self.trained {
            return Err(Error::InvalidArgument("encoder has not been trained".into()));
        }
        Ok(FrozenEncoder(self.encoder.clone()))
    }

    /// Reconstruction loss and its gradient with respect to every parameter
    /// (encoder first, then decoder).
    pub fn loss_and_grads(&self, batch: &Tensor) -> Result<(f64, Vec<Tensor>, Vec<Tensor>)> {
        let enc = self.encoder.forward_trace(batch)?;
        let dec = self.decoder.forward_trace(enc.output())?;
        let loss = mse_loss(batch, dec.output())?;
        let grad_out = mse_grad(batch, dec.output())?;
        let dg = self.decoder.backward(&dec, &grad_out)?;
        let eg = self.encoder.backward(&enc, &dg.input)?;
        Ok((loss, eg.params, dg.params))
    }
}

/// A trained encoder that can no longer be updated.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenEncoder(Network);

impl FrozenEncoder {
    pub fn network(&self) -> &Network {
        &self.0
    }

    pub fn encode(&self, batch: &Tensor) -> Result<Tensor> {
        self.0.forward(batch)
    }

    pub(crate) fn forward_trace(&self, batch: &Tensor) -> Result<Trace> {
        self.0.forward_trace(batch)
    }

    /// Gradient with respect to the encoder input only.
    pub(crate) fn input_gradient(&self, trace: &Trace, grad_latent: &Tensor) -> Result<Tensor> {
        Ok(self.0.backward(trace, grad_latent)?.input)
    }
}

/// Mean squared error over every entry of the batch.
pub fn mse_loss(real: &Tensor, reconstructed: &Tensor) -> Result<f64> {
    if real.shape() != reconstructed.shape() {
        return Err(Error::Shape(format!(
            "mse: {:?} vs {:?}",
            real.shape(),
            reconstructed.shape()
        )));
    }
    let sum: f64 = real
        .data()
        .iter()
        .zip(reconstructed.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / real.len() as f64)
}

/// Gradient of [`mse_loss`] with respect to `reconstructed`.
pub fn mse_grad(real: &Tensor, reconstructed: &Tensor) -> Result<Tensor> {
    if real.shape() != reconstructed.shape() {
        return Err(Error::Shape("mse gradient: shape mismatch".into()));
    }
    let scale = 2.0 / real.len() as f64;
    let data = real
        .data()
        .iter()
        .zip(reconstructed.data())
        .map(|(a, b)| scale * (b - a))
        .collect();
    Tensor::new(real.shape().to_vec(), data)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

/// Shuffled mini-batch index lists for one epoch; the last batch may be short.
pub(crate) fn epoch_batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Trains with Adam on shuffled mini-batches. Returns one sample-weighted
/// mean loss per epoch.
pub fn train_autoencoder(ae: &mut AutoEncoder, train: &Tensor, cfg: &TrainConfig) -> Result<Vec<f64>> {
    if train.shape().len() != 2 || train.shape()[1] != SAMPLE_LEN {
        return Err(Error::Shape(format!(
            "training data must be [n, {SAMPLE_LEN}], got {:?}",
            train.shape()
        )));
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(Error::InvalidArgument("epochs and batch size must be positive".into()));
    }
    let n = train.rows();
    let adam_cfg = AdamConfig::with_learning_rate(cfg.learning_rate);
    let mut enc_opt = Adam::new(&ae.encoder, adam_cfg);
    let mut dec_opt = Adam::new(&ae.decoder, adam_cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut total = 0.0;
        for batch_idx in epoch_batches(n, cfg.batch_size, &mut rng) {
            let batch = train.select_rows(&batch_idx)?;
            let (loss, enc_grads, dec_grads) = ae.loss_and_grads(&batch)?;
            if !loss.is_finite() {
                return Err(Error::Divergence(format!("auto-encoder loss {loss} at epoch {epoch}")));
            }
            enc_opt.step(&mut ae.encoder, &enc_grads)?;
            dec_opt.step(&mut ae.decoder, &dec_grads)?;
            total += loss * batch_idx.len() as f64;
        }
        history.push(total / n as f64);
    }
    ae.trained = true;
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{flatten, gradient_check_coords, DEFAULT_EPS};

    fn random_batch(rows: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * SAMPLE_LEN).map(|_| rng.random_range(-0.9..0.9)).collect();
        Tensor::new(vec![rows, SAMPLE_LEN], data).unwrap()
    }

    #[test]
    fn architecture_matches_widths() {
        let ae = AutoEncoder::new(0).unwrap();
        let widths: Vec<usize> = ae
            .encoder()
            .layers
            .iter()
            .map(|l| match l {
                Layer::Dense(d) => d.out_dim(),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(widths, ENCODER_WIDTHS);
        assert!(AutoEncoder::from_networks(ae.decoder().clone(), ae.encoder().clone(), false).is_err());
    }

    #[test]
    fn encode_decode_shapes_and_range() {
        let ae = AutoEncoder::new(1).unwrap();
        for b in [1, 5] {
            let x = random_batch(b, b as u64);
            let z = ae.encode(&x).unwrap();
            assert_eq!(z.shape(), &[b, LATENT_DIM]);
            let y = ae.decode(&z).unwrap();
            assert_eq!(y.shape(), &[b, SAMPLE_LEN]);
            assert!(y.data().iter().all(|v| v.abs() < 1.0));
        }
        assert!(ae.encode(&Tensor::zeros(&[2, 71])).is_err());
        assert!(ae.decode(&Tensor::zeros(&[2, 15])).is_err());
    }

    #[test]
    fn zero_parameters_give_zero_latents() {
        let mut ae = AutoEncoder::new(2).unwrap();
        for p in ae.encoder.params_mut() {
            p.data_mut().fill(0.0);
        }
        let z = ae.encode(&random_batch(3, 9)).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identical_rows_identical_latents() {
        let ae = AutoEncoder::new(3).unwrap();
        let one = random_batch(1, 4);
        let x = Tensor::from_rows(&[one.row(0), one.row(0)]).unwrap();
        let z = ae.encode(&x).unwrap();
        assert_eq!(z.row(0), z.row(1));
    }

    #[test]
    fn mse_examples() {
        let a = Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::new(vec![1, 2], vec![1.0, 4.0]).unwrap();
        assert_eq!(mse_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(mse_loss(&a, &b).unwrap(), 2.0);
        let x = random_batch(4, 1);
        let y = random_batch(4, 2);
        let xp = x.select_rows(&[2, 0, 3, 1]).unwrap();
        let yp = y.select_rows(&[2, 0, 3, 1]).unwrap();
        assert!((mse_loss(&x, &y).unwrap() - mse_loss(&xp, &yp).unwrap()).abs() < 1e-15);
        assert!(mse_loss(&a, &Tensor::zeros(&[2, 1])).is_err());
    }

    #[test]
    fn reconstruction_gradient_matches_finite_differences() {
        let ae = AutoEncoder::new(5).unwrap();
        let x = random_batch(3, 6);
        let (_, eg, dg) = ae.loss_and_grads(&x).unwrap();
        let analytic: Vec<f64> = flatten(&eg).into_iter().chain(flatten(&dg)).collect();
        let n_enc = ae.encoder.param_count();
        let flat: Vec<f64> = ae.encoder.flat_params().into_iter().chain(ae.decoder.flat_params()).collect();
        let params = Tensor::new(vec![flat.len()], flat).unwrap();
        let analytic = Tensor::new(vec![analytic.len()], analytic).unwrap();
        // A spread of coordinates across all seven layers.
        let coords: Vec<usize> = (0..params.len()).step_by(397).collect();
        let err = gradient_check_coords(
            |p| {
                let mut probe = ae.clone();
                probe.encoder.set_flat_params(&p.data()[..n_enc]).unwrap();
                probe.decoder.set_flat_params(&p.data()[n_enc..]).unwrap();
                mse_loss(&x, &probe.reconstruct(&x).unwrap()).unwrap()
            },
            &params,
            &analytic,
            DEFAULT_EPS,
            &coords,
        )
        .unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn freeze_requires_training() {
        let ae = AutoEncoder::new(0).unwrap();
        assert!(ae.freeze_encoder().is_err());
    }

    #[test]
    fn training_is_deterministic_and_decreasing() {
        let x = random_batch(40, 10);
        let cfg = TrainConfig {
            epochs: 15,
            batch_size: 16,
            learning_rate: 1e-3,
            seed: 4,
        };
        let mut a = AutoEncoder::new(7).unwrap();
        let mut b = AutoEncoder::new(7).unwrap();
        let ha = train_autoencoder(&mut a, &x, &cfg).unwrap();
        let hb = train_autoencoder(&mut b, &x, &cfg).unwrap();
        assert_eq!(ha.len(), 15);
        assert_eq!(ha, hb);
        assert!(ha.iter().all(|v| v.is_finite()));
        assert!(ha.last().unwrap() < &ha[0]);
        assert!(a.is_trained());
        assert!(train_autoencoder(&mut a, &Tensor::zeros(&[2, 10]), &cfg).is_err());
    }

    #[test]
    fn overfits_single_repeated_sample() {
        let one = random_batch(1, 21);
        let rows: Vec<&[f64]> = (0..8).map(|_| one.row(0)).collect();
        let x = Tensor::from_rows(&rows).unwrap();
        let mut ae = AutoEncoder::new(8).unwrap();
        let cfg = TrainConfig {
            epochs: 1500,
            batch_size: 8,
            learning_rate: 1e-3,
            seed: 0,
        };
        train_autoencoder(&mut ae, &x, &cfg).unwrap();
        let err = mse_loss(&one, &ae.reconstruct(&one).unwrap()).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn compression_sanity_pair() {
        // A single repeated curve (rank 1) compresses almost perfectly;
        // 72-dim white noise cannot be squeezed through 16 latents.
        let cfg = TrainConfig {
            epochs: 3000,
            batch_size: 8,
            learning_rate: 1e-3,
            seed: 1,
        };
        let one = random_batch(1, 31);
        let rows: Vec<&[f64]> = (0..8).map(|_| one.row(0)).collect();
        let low_rank = Tensor::from_rows(&rows).unwrap();
        let mut ae = AutoEncoder::new(9).unwrap();
        let h = train_autoencoder(&mut ae, &low_rank, &cfg).unwrap();
        assert!(*h.last().unwrap() < 1e-6, "low-rank loss {}", h.last().unwrap());

        let noise = random_batch(512, 32);
        let mut ae = AutoEncoder::new(9).unwrap();
        let h = train_autoencoder(&mut ae, &noise, &TrainConfig { epochs: 100, batch_size: 32, ..cfg }).unwrap();
        assert!(*h.last().unwrap() > 5e-2, "noise loss {}", h.last().unwrap());
    }
}
