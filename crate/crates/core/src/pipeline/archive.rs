//! Self-describing JSON model archive. Tensors are stored as base64 of
//! their little-endian `f64` bytes so a save/load round trip is bit-exact.

use std::collections::BTreeMap;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autoencoder::{AutoEncoder, DECODER_WIDTHS, ENCODER_WIDTHS, LATENT_DIM};
use crate::dataset::{Normalizer, SAMPLE_LEN};
use crate::error::{Error, Result};
use crate::generator::{ScenarioGenerator, DENSE_WIDTH, RAW_OUTPUT_LEN, RESHAPE, TCONV_SCHEDULE};
use crate::nn::Network;
use crate::tensor::Tensor;

use super::io::write_atomic;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub sample_len: usize,
    pub latent_dim: usize,
    pub encoder_widths: Vec<usize>,
    pub decoder_widths: Vec<usize>,
    pub noise_dim: usize,
    pub generator_dense_width: usize,
    pub generator_reshape: [usize; 2],
    /// `(filters, kernel_len, stride)` per transposed convolution.
    pub generator_tconv: Vec<(usize, usize, usize)>,
    pub generator_raw_output_len: usize,
}

impl Architecture {
    pub fn current(noise_dim: usize) -> Self {
        Self {
            sample_len: SAMPLE_LEN,
            latent_dim: LATENT_DIM,
            encoder_widths: ENCODER_WIDTHS.to_vec(),
            decoder_widths: DECODER_WIDTHS.to_vec(),
            noise_dim,
            generator_dense_width: DENSE_WIDTH,
            generator_reshape: RESHAPE,
            generator_tconv: TCONV_SCHEDULE.to_vec(),
            generator_raw_output_len: RAW_OUTPUT_LEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub split_fraction: f64,
    pub ae_epochs: usize,
    pub gen_epochs: usize,
    pub ae_final_loss: f64,
    pub gen_final_loss: f64,
    pub bandwidth: f64,
    /// ISO dates of the days used for training.
    pub train_dates: Vec<String>,
    /// ISO dates of the held-out days used as the evaluation reference.
    pub test_dates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredTensor {
    shape: Vec<usize>,
    data: String,
}

impl StoredTensor {
    fn encode(t: &Tensor) -> Self {
        let bytes: Vec<u8> = t.data().iter().flat_map(|v| v.to_le_bytes()).collect();
        Self {
            shape: t.shape().to_vec(),
            data: B64.encode(bytes),
        }
    }

    fn decode(&self, name: &str) -> Result<Tensor> {
        let bytes = B64
            .decode(&self.data)
            .map_err(|e| Error::Archive(format!("{name}: bad base64: {e}")))?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Archive(format!("{name}: payload is not a whole number of f64")));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Tensor::new(self.shape.clone(), data).map_err(|e| Error::Archive(format!("{name}: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArchive {
    pub format_version: u32,
    pub architecture: Architecture,
    pub normalizer: Normalizer,
    tensors: BTreeMap<String, StoredTensor>,
    pub training: TrainingMetadata,
}

/// A trained auto-encoder and generator with the normalization they were
/// trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmnModel {
    pub autoencoder: AutoEncoder,
    pub generator: ScenarioGenerator,
    pub normalizer: Normalizer,
    pub training: TrainingMetadata,
}

fn fill(net: &mut Network, prefix: &str, tensors: &BTreeMap<String, StoredTensor>) -> Result<()> {
    let names: Vec<String> = net.named_params(prefix).into_iter().map(|(n, _)| n).collect();
    for (name, param) in names.iter().zip(net.params_mut()) {
        let stored = tensors
            .get(name)
            .ok_or_else(|| Error::Archive(format!("missing tensor `{name}`")))?;
        let t = stored.decode(name)?;
        if t.shape() != param.shape() {
            return Err(Error::Archive(format!(
                "`{name}` has shape {:?}, expected {:?}",
                t.shape(),
                param.shape()
            )));
        }
        t.ensure_finite(name).map_err(|e| Error::Archive(e.to_string()))?;
        *param = t;
    }
    Ok(())
}

impl GmmnModel {
    pub fn to_archive(&self) -> ModelArchive {
        let mut tensors = BTreeMap::new();
        for (prefix, net) in [
            ("encoder", self.autoencoder.encoder()),
            ("decoder", self.autoencoder.decoder()),
            ("generator", self.generator.network()),
        ] {
            for (name, t) in net.named_params(prefix) {
                tensors.insert(name, StoredTensor::encode(t));
            }
        }
        ModelArchive {
            format_version: FORMAT_VERSION,
            architecture: Architecture::current(self.generator.noise_dim()),
            normalizer: self.normalizer.clone(),
            tensors,
            training: self.training.clone(),
        }
    }

    pub fn from_archive(archive: &ModelArchive) -> Result<Self> {
        if archive.format_version != FORMAT_VERSION {
            return Err(Error::Archive(format!(
                "unsupported format version {}",
                archive.format_version
            )));
        }
        let expected = Architecture::current(archive.architecture.noise_dim);
        if archive.architecture != expected {
            return Err(Error::Archive("architecture descriptor does not match this build".into()));
        }
        let template = AutoEncoder::new(0)?;
        let mut encoder = template.encoder().clone();
        let mut decoder = template.decoder().clone();
        fill(&mut encoder, "encoder", &archive.tensors)?;
        fill(&mut decoder, "decoder", &archive.tensors)?;
        let autoencoder = AutoEncoder::from_networks(encoder, decoder, true)?;

        let mut gen_net = ScenarioGenerator::new(expected.noise_dim, 0)?.network().clone();
        fill(&mut gen_net, "generator", &archive.tensors)?;
        let generator = ScenarioGenerator::from_network(gen_net)?;

        let n = &archive.normalizer;
        if (0..3).any(|c| !(n.max[c] > n.min[c])) {
            return Err(Error::Archive("degenerate normalizer".into()));
        }
        Ok(Self {
            autoencoder,
            generator,
            normalizer: archive.normalizer.clone(),
            training: archive.training.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_archive()).expect("archive serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let archive: ModelArchive =
            serde_json::from_str(text).map_err(|e| Error::Archive(format!("invalid JSON: {e}")))?;
        Self::from_archive(&archive)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}
