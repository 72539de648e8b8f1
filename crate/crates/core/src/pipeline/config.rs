use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evaluation::EvalConfig;
use crate::generator::{Bandwidth, DEFAULT_NOISE_DIM};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeStage {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenStage {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub noise_dim: usize,
    pub bandwidth: Bandwidth,
}

/// Everything a training run needs. `(config, seed)` fully determines the
/// produced artifacts.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data_path: PathBuf,
    pub seed: u64,
    pub split_fraction: f64,
    pub ae: AeStage,
    pub gen: GenStage,
    pub eval: EvalConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_path: PathBuf::from("loads.csv"),
            seed: 0,
            split_fraction: 0.8,
            ae: AeStage {
                epochs: 500,
                batch_size: 32,
                learning_rate: 1e-3,
            },
            gen: GenStage {
                epochs: 500,
                batch_size: 32,
                learning_rate: 1e-3,
                noise_dim: DEFAULT_NOISE_DIM,
                bandwidth: Bandwidth::Auto,
            },
            eval: EvalConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

impl RunConfig {
    /// Sets one `key = value` entry. Keys use dotted stage prefixes,
    /// e.g. `ae.epochs` or `gen.bandwidth`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "data_path" => self.data_path = PathBuf::from(value),
            "seed" => self.seed = parse(key, value)?,
            "split_fraction" => self.split_fraction = parse(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "ae.epochs" => self.ae.epochs = parse(key, value)?,
            "ae.batch_size" => self.ae.batch_size = parse(key, value)?,
            "ae.lr" => self.ae.learning_rate = parse(key, value)?,
            "gen.epochs" => self.gen.epochs = parse(key, value)?,
            "gen.batch_size" => self.gen.batch_size = parse(key, value)?,
            "gen.lr" => self.gen.learning_rate = parse(key, value)?,
            "gen.noise_dim" => self.gen.noise_dim = parse(key, value)?,
            "gen.bandwidth" => {
                self.gen.bandwidth = if value == "auto" {
                    Bandwidth::Auto
                } else {
                    Bandwidth::Fixed(parse(key, value)?)
                }
            }
            "eval.bins" => self.eval.bins = parse(key, value)?,
            "eval.max_lag" => self.eval.max_lag = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` document (`#` starts a comment).
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected key = value", i + 1)));
            };
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_str(&text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad(format!("split_fraction {} not in (0, 1)", self.split_fraction));
        }
        for (name, lr) in [("ae.lr", self.ae.learning_rate), ("gen.lr", self.gen.learning_rate)] {
            if !(lr > 0.0 && lr <= 0.01) {
                return bad(format!("{name} = {lr} not in (0, 0.01]"));
            }
        }
        if self.ae.epochs == 0 || self.gen.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.ae.batch_size == 0 || self.gen.batch_size < 2 {
            return bad("ae.batch_size must be >= 1 and gen.batch_size >= 2".into());
        }
        if self.gen.noise_dim == 0 {
            return bad("gen.noise_dim must be positive".into());
        }
        if let Bandwidth::Fixed(v) = self.gen.bandwidth {
            if !(v > 0.0) {
                return bad(format!("gen.bandwidth {v} must be positive"));
            }
        }
        if self.eval.bins == 0 || self.eval.max_lag >= crate::dataset::HOURS {
            return bad("eval.bins must be positive and eval.max_lag below 24".into());
        }
        Ok(())
    }
}
