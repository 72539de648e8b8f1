//! Synthetic hourly cooling/heating/power data with known structure.
//!
//! A daily temperature index (annual cosine plus an AR(1) weather anomaly)
//! drives cooling up and heating down; power follows temperature and an
//! office-hours occupancy bump. Each class adds its own hourly AR(1) noise.

use std::path::{Path, PathBuf};

use chrono::{Datelike, Duration, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{LoadRecord, TIMESTAMP_FORMAT};
use crate::error::{Error, Result};
use crate::evaluation::{autocorrelation, pearson};

use super::io::write_atomic;

pub const MIN_DAYS: usize = 64;

/// Designed cross-class correlation signs and magnitude band, plus the
/// values realized by one draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTargets {
    pub days: usize,
    pub seed: u64,
    /// Target signs for (cooling, heating), (cooling, power), (heating, power).
    pub target_signs: [i8; 3],
    pub target_magnitude_range: [f64; 2],
    pub target_min_lag1_autocorrelation: f64,
    pub realized_pearson: [f64; 3],
    pub realized_lag1_autocorrelation: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub records: Vec<LoadRecord>,
    pub targets: SyntheticTargets,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn make_synthetic_dataset(days: usize, seed: u64) -> Result<SyntheticDataset> {
    if days < MIN_DAYS {
        return Err(Error::InvalidArgument(format!("synthetic data needs at least {MIN_DAYS} days, got {days}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weather = Normal::new(0.0, 0.25).expect("valid sd");
    let noise = [
        Normal::new(0.0, 0.6).expect("valid sd"),
        Normal::new(0.0, 0.5).expect("valid sd"),
        Normal::new(0.0, 0.6).expect("valid sd"),
    ];
    let start = NaiveDate::from_ymd_opt(2011, 7, 17).expect("valid date");
    let two_pi = 2.0 * std::f64::consts::PI;

    let mut anomaly = 0.0;
    let mut eps = [0.0f64; 3];
    let mut records = Vec::with_capacity(days * 24);
    for d in 0..days {
        let date = start + Duration::days(d as i64);
        let season = (two_pi * (date.ordinal() as f64 - 200.0) / 365.25).cos();
        anomaly = 0.8 * anomaly + weather.sample(&mut rng);
        let temp = season + anomaly;
        let workday = if date.weekday().number_from_monday() <= 5 { 1.0 } else { 0.8 };
        for h in 0..24 {
            let hf = h as f64;
            let diurnal = 0.5 - 0.5 * (two_pi * (hf - 3.0) / 24.0).cos();
            let occupancy = sigmoid(hf - 7.5) * sigmoid(18.5 - hf);
            for (e, n) in eps.iter_mut().zip(&noise) {
                *e = 0.9 * *e + n.sample(&mut rng);
            }
            let cooling = 6.0 + 30.0 * sigmoid(1.8 * temp) * (0.6 + 0.8 * diurnal) + eps[0];
            let heating = 5.0 + 22.0 * sigmoid(-1.8 * temp) * (1.15 - 0.3 * diurnal) + eps[1];
            let power = 28.0 + 8.0 * sigmoid(1.8 * temp) + 6.0 * occupancy * workday + 3.0 * diurnal + eps[2];
            records.push(LoadRecord {
                timestamp: date.and_hms_opt(h, 0, 0).expect("valid hour"),
                cooling: cooling.max(0.0),
                heating: heating.max(0.0),
                power: power.max(0.0),
            });
        }
    }

    let series: [Vec<f64>; 3] = [
        records.iter().map(|r| r.cooling).collect(),
        records.iter().map(|r| r.heating).collect(),
        records.iter().map(|r| r.power).collect(),
    ];
    let realized_pearson = [
        pearson(&series[0], &series[1])?,
        pearson(&series[0], &series[2])?,
        pearson(&series[1], &series[2])?,
    ];
    let mut realized_lag1 = [0.0; 3];
    for (r, s) in realized_lag1.iter_mut().zip(&series) {
        *r = autocorrelation(s, 1)?[1];
    }
    Ok(SyntheticDataset {
        records,
        targets: SyntheticTargets {
            days,
            seed,
            target_signs: [-1, 1, -1],
            target_magnitude_range: [0.5, 0.95],
            target_min_lag1_autocorrelation: 0.8,
            realized_pearson,
            realized_lag1_autocorrelation: realized_lag1,
        },
    })
}

pub fn records_to_csv(records: &[LoadRecord]) -> String {
    let mut s = String::from("timestamp,cooling,heating,power\n");
    for r in records {
        s.push_str(&format!(
            "{},{},{},{}\n",
            r.timestamp.format(TIMESTAMP_FORMAT),
            r.cooling,
            r.heating,
            r.power
        ));
    }
    s
}

/// Path of the sidecar file documenting the targets of `csv_path`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("targets.json")
}

/// Writes the CSV and its `.targets.json` sidecar.
pub fn write_synthetic_dataset(path: &Path, days: usize, seed: u64) -> Result<SyntheticDataset> {
    let ds = make_synthetic_dataset(days, seed)?;
    let sidecar = serde_json::to_string_pretty(&ds.targets).expect("targets serialize");
    write_atomic(path, records_to_csv(&ds.records).as_bytes())?;
    write_atomic(&sidecar_path(path), sidecar.as_bytes())?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn realized_structure_matches_design() {
        let ds = make_synthetic_dataset(416, 7).unwrap();
        assert_eq!(ds.records.len(), 416 * 24);
        let t = &ds.targets;
        for (r, sign) in t.realized_pearson.iter().zip(t.target_signs) {
            assert_eq!(r.signum() as i8, sign);
            assert!(r.abs() >= 0.5 && r.abs() <= 0.95, "{r}");
        }
        for l in t.realized_lag1_autocorrelation {
            assert!(l > 0.8, "{l}");
        }
        assert!(ds.records.iter().all(|r| r.cooling >= 0.0 && r.heating >= 0.0 && r.power >= 0.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = make_synthetic_dataset(64, 3).unwrap();
        let b = make_synthetic_dataset(64, 3).unwrap();
        assert_eq!(records_to_csv(&a.records), records_to_csv(&b.records));
        assert_ne!(records_to_csv(&a.records), records_to_csv(&make_synthetic_dataset(64, 4).unwrap().records));
    }

    #[test]
    fn too_few_days_rejected() {
        assert!(make_synthetic_dataset(63, 0).is_err());
    }
}
