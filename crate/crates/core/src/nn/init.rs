use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Glorot (Xavier) uniform initialization of an `[in_dim, out_dim]` weight
/// matrix: entries are drawn from `U(-a, a)` with `a = sqrt(6 / (in + out))`.
pub fn glorot_init(in_dim: usize, out_dim: usize, seed: u64) -> Result<Tensor> {
    glorot_uniform(&[in_dim, out_dim], in_dim, out_dim, seed)
}

/// Glorot uniform initialization for an arbitrary shape with explicit fans.
pub fn glorot_uniform(shape: &[usize], fan_in: usize, fan_out: usize, seed: u64) -> Result<Tensor> {
    if fan_in == 0 || fan_out == 0 || shape.iter().any(|&d| d == 0) {
        return Err(Error::InvalidArgument(format!(
            "glorot init needs positive dims, got shape {shape:?} fans ({fan_in}, {fan_out})"
        )));
    }
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len: usize = shape.iter().product();
    let data = (0..len).map(|_| rng.random_range(-limit..=limit)).collect();
    Tensor::new(shape.to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_entry_within_bound() {
        for seed in 0..50 {
            let t = glorot_init(1, 1, seed).unwrap();
            assert_eq!(t.shape(), &[1, 1]);
            assert!(t.data()[0].abs() <= 3f64.sqrt());
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let a = glorot_init(64, 32, 7).unwrap();
        let b = glorot_init(64, 32, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, glorot_init(64, 32, 8).unwrap());
    }

    #[test]
    fn variance_matches_uniform_moments() {
        // U(-1, 1) for (3, 3): variance 1/3.
        let mut values = Vec::new();
        let mut seed = 0;
        while values.len() < 100_000 {
            values.extend_from_slice(glorot_init(3, 3, seed).unwrap().data());
            seed += 1;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let expected = 6.0 / 6.0 / 3.0;
        assert!((var - expected).abs() / expected < 0.05, "variance {var}");
    }

    #[test]
    fn rejects_zero_dims() {
        assert!(glorot_init(0, 3, 1).is_err());
        assert!(glorot_init(3, 0, 1).is_err());
    }
}
