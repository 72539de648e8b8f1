//! Scenario generation for cooling, heating and power loads with a
//! generative moment matching network (GMMN).
//!
//! The pipeline: daily 72-value load samples are min-max normalized, an
//! auto-encoder learns a 16-dimensional latent space, and a
//! transposed-convolution generator is trained to minimize the squared
//! maximum mean discrepancy between encoded generated and real batches.
//! The [`evaluation`] module holds the statistics used to compare
//! generated scenarios with held-out real ones.

pub mod autoencoder;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod generator;
pub mod nn;
pub mod pipeline;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
