//! Statistics for comparing generated scenarios with real ones:
//! autocorrelation, periodogram PSD, load-duration curves, Pearson
//! matrices, histogram densities and nearest-neighbour matching.

use std::collections::BTreeMap;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dataset::{to_unit_range, LoadClass, Normalizer, HOURS, SAMPLE_LEN};
use crate::error::{Error, Result};

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Autocorrelation for lags `0..=max_lag` using the series mean and
/// variance, each lag averaged over its `T - τ` valid pairs. Values are
/// clamped to `[-1, 1]`.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let t = series.len();
    if t < 2 {
        return Err(Error::InvalidArgument("autocorrelation needs at least 2 points".into()));
    }
    if max_lag >= t {
        return Err(Error::InvalidArgument(format!("max lag {max_lag} must be below series length {t}")));
    }
    let mu = mean(series);
    let var = series.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / t as f64;
    if !(var > 0.0) {
        return Err(Error::InvalidArgument("autocorrelation of a constant series".into()));
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(1.0);
    for lag in 1..=max_lag {
        let pairs = t - lag;
        let cov = (0..pairs)
            .map(|i| (series[i] - mu) * (series[i + lag] - mu))
            .sum::<f64>()
            / pairs as f64;
        out.push((cov / var).clamp(-1.0, 1.0));
    }
    Ok(out)
}

/// One-sided periodogram at one sample per hour: `|DFT(x)|² / T`, with every
/// bin other than DC and (for even `T`) Nyquist doubled.
pub fn psd_periodogram(series: &[f64]) -> Result<Vec<f64>> {
    let t = series.len();
    if t < 2 {
        return Err(Error::InvalidArgument("periodogram needs at least 2 points".into()));
    }
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(t).process(&mut buf);
    let bins = t / 2 + 1;
    Ok((0..bins)
        .map(|k| {
            let p = buf[k].norm_sqr() / t as f64;
            let unpaired = k == 0 || (t % 2 == 0 && k == t / 2);
            if unpaired {
                p
            } else {
                2.0 * p
            }
        })
        .collect())
}

/// Frequencies (cycles per hour) of the periodogram bins for length `t`.
pub fn psd_frequencies(t: usize) -> Vec<f64> {
    (0..t / 2 + 1).map(|k| k as f64 / t as f64).collect()
}

/// Loads sorted in descending order.
pub fn duration_curve(day: &[f64]) -> Vec<f64> {
    let mut out = day.to_vec();
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

/// For each hour `j`, the number of hours whose load is at least `day[j]`.
pub fn exceedance_times(day: &[f64]) -> Vec<usize> {
    day.iter()
        .map(|&pj| day.iter().filter(|&&pi| pi >= pj).count())
        .collect()
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Shape(format!(
            "pearson needs two equal series of length >= 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0) || !(syy > 0.0) {
        return Err(Error::InvalidArgument("pearson of a constant series".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson matrix between columns, symmetric with exact unit diagonal.
fn column_corr(columns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let k = columns.len();
    let mut m = vec![vec![0.0; k]; k];
    for i in 0..k {
        m[i][i] = 1.0;
        for j in (i + 1)..k {
            let r = pearson(&columns[i], &columns[j]).map_err(|e| {
                Error::InvalidArgument(format!("correlation of columns {i} and {j}: {e}"))
            })?;
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    Ok(m)
}

/// Hour-by-hour Pearson matrix across days.
pub fn temporal_corr_matrix<S: AsRef<[f64]>>(samples: &[S]) -> Result<Vec<Vec<f64>>> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument("temporal correlation needs at least 2 samples".into()));
    }
    let width = samples[0].as_ref().len();
    if samples.iter().any(|s| s.as_ref().len() != width) {
        return Err(Error::Shape("samples of unequal length".into()));
    }
    let columns: Vec<Vec<f64>> = (0..width)
        .map(|h| samples.iter().map(|s| s.as_ref()[h]).collect())
        .collect();
    column_corr(&columns)
}

/// 3×3 Pearson matrix between the cooling, heating and power series with
/// all days concatenated.
pub fn cross_load_matrix<S: AsRef<[f64]>>(samples: &[S]) -> Result<[[f64; 3]; 3]> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument("cross-load correlation needs at least 2 samples".into()));
    }
    if samples.iter().any(|s| s.as_ref().len() != SAMPLE_LEN) {
        return Err(Error::Shape(format!("samples must have {SAMPLE_LEN} values")));
    }
    let columns: Vec<Vec<f64>> = LoadClass::ALL
        .iter()
        .map(|c| samples.iter().flat_map(|s| c.slice(s.as_ref()).iter().copied()).collect())
        .collect();
    let m = column_corr(&columns)?;
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        out[i].copy_from_slice(&m[i]);
    }
    Ok(out)
}

/// Largest absolute element-wise difference between two 3×3 matrices.
pub fn max_abs_error(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Density-normalized histogram over a fixed range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pdf {
    pub lo: f64,
    pub hi: f64,
    pub density: Vec<f64>,
}

impl Pdf {
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.density.len() as f64
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.density.len()).map(|i| self.lo + (i as f64 + 0.5) * w).collect()
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }
}

/// Histogram density of `values` over `[lo, hi]`; out-of-range values are
/// counted in the end bins.
pub fn pdf_histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Pdf> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::InvalidArgument(format!("bad histogram: {bins} bins over [{lo}, {hi}]")));
    }
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::InvalidArgument("histogram of no finite values".into()));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in &finite {
        let idx = ((v - lo) / width).floor();
        let idx = if idx < 0.0 { 0 } else { (idx as usize).min(bins - 1) };
        counts[idx] += 1;
    }
    let n = finite.len() as f64;
    Ok(Pdf {
        lo,
        hi,
        density: counts.iter().map(|&c| c as f64 / (n * width)).collect(),
    })
}

/// `sqrt(Σ (a_i - b_i)² · bin_width)`.
pub fn pdf_distance(a: &Pdf, b: &Pdf) -> Result<f64> {
    if a.density.len() != b.density.len() || a.lo != b.lo || a.hi != b.hi {
        return Err(Error::Shape("pdfs have different binning".into()));
    }
    let w = a.bin_width();
    Ok(a.density
        .iter()
        .zip(&b.density)
        .map(|(x, y)| (x - y) * (x - y) * w)
        .sum::<f64>()
        .sqrt())
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Index of the closest real sample (lowest index on ties) and its distance.
pub fn nearest_real_match<S: AsRef<[f64]>>(generated: &[f64], real: &[S]) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in real.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != generated.len() {
            return Err(Error::Shape(format!("real sample {i} has length {}", r.len())));
        }
        let d = euclidean(generated, r);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("empty real set".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub bins: usize,
    pub max_lag: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { bins: 50, max_lag: HOURS - 1 }
    }
}

/// The same statistic for the real and the generated population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paired<T> {
    pub real: T,
    pub generated: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    /// Mean per-day autocorrelation over lags `0..=max_lag`.
    pub autocorrelation: Paired<Vec<f64>>,
    /// Mean per-day one-sided periodogram.
    pub psd: Paired<Vec<f64>>,
    /// Mean per-day duration curve.
    pub duration_curve: Paired<Vec<f64>>,
    pub temporal_corr: Paired<Vec<Vec<f64>>>,
    /// Density over `[0, 1]` min-max normalized loads.
    pub pdf: Paired<Pdf>,
    pub pdf_distance: f64,
    /// Mean absolute element-wise difference of the temporal matrices.
    pub temporal_corr_mae: f64,
    pub lag1_autocorrelation_diff: f64,
    /// Mean of the daily 24-hour sums.
    pub mean_daily_energy: Paired<f64>,
    pub energy_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCorr {
    pub real: [[f64; 3]; 3],
    pub generated: [[f64; 3]; 3],
    pub max_error: f64,
}

/// Full comparison of a generated scenario set against real samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub config: EvalConfig,
    pub real_count: usize,
    pub generated_count: usize,
    pub classes: BTreeMap<LoadClass, ClassReport>,
    pub cross_corr: CrossCorr,
}

fn mean_vectors(vs: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; vs[0].len()];
    for v in vs {
        for (o, x) in out.iter_mut().zip(v) {
            *o += x;
        }
    }
    out.iter_mut().for_each(|o| *o /= vs.len() as f64);
    out
}

/// Per-class statistics of one population of physical-unit samples.
struct ClassStats {
    autocorrelation: Vec<f64>,
    psd: Vec<f64>,
    duration_curve: Vec<f64>,
    temporal_corr: Vec<Vec<f64>>,
    pdf: Pdf,
    mean_daily_energy: f64,
}

fn class_stats<S: AsRef<[f64]>>(
    samples: &[S],
    class: LoadClass,
    normalizer: &Normalizer,
    cfg: &EvalConfig,
) -> Result<ClassStats> {
    let days: Vec<&[f64]> = samples.iter().map(|s| class.slice(s.as_ref())).collect();
    // Flat days carry no autocorrelation information and are skipped.
    let acfs: Vec<Vec<f64>> = days
        .iter()
        .filter_map(|d| autocorrelation(d, cfg.max_lag).ok())
        .collect();
    if acfs.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "every {} day is constant; autocorrelation undefined",
            class.name()
        )));
    }
    let psds = days.iter().map(|d| psd_periodogram(d)).collect::<Result<Vec<_>>>()?;
    let curves: Vec<Vec<f64>> = days.iter().map(|d| duration_curve(d)).collect();
    let temporal_corr = temporal_corr_matrix(&days)
        .map_err(|e| Error::InvalidArgument(format!("{} temporal correlation: {e}", class.name())))?;

    let c = class.index();
    let unit: Vec<f64> = days
        .iter()
        .flat_map(|d| d.iter())
        .map(|&x| {
            let n = 2.0 * (x - normalizer.min[c]) / (normalizer.max[c] - normalizer.min[c]) - 1.0;
            to_unit_range(n)
        })
        .collect();
    let pdf = pdf_histogram(&unit, cfg.bins, 0.0, 1.0)?;
    let mean_daily_energy = mean(&days.iter().map(|d| d.iter().sum::<f64>()).collect::<Vec<_>>());
    Ok(ClassStats {
        autocorrelation: mean_vectors(&acfs),
        psd: mean_vectors(&psds),
        duration_curve: mean_vectors(&curves),
        temporal_corr,
        pdf,
        mean_daily_energy,
    })
}

impl MetricReport {
    /// Compares two sets of physical-unit 72-value samples. The normalizer
    /// maps loads onto `[0, 1]` for the density estimates.
    pub fn compare<R: AsRef<[f64]>, G: AsRef<[f64]>>(
        real: &[R],
        generated: &[G],
        normalizer: &Normalizer,
        cfg: &EvalConfig,
    ) -> Result<Self> {
        let mut classes = BTreeMap::new();
        for class in LoadClass::ALL {
            let r = class_stats(real, class, normalizer, cfg)?;
            let g = class_stats(generated, class, normalizer, cfg)?;
            let n = r.temporal_corr.len();
            let temporal_corr_mae = r
                .temporal_corr
                .iter()
                .flatten()
                .zip(g.temporal_corr.iter().flatten())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / (n * n) as f64;
            let lag1_autocorrelation_diff = match (r.autocorrelation.get(1), g.autocorrelation.get(1)) {
                (Some(a), Some(b)) => (a - b).abs(),
                _ => 0.0,
            };
            classes.insert(
                class,
                ClassReport {
                    pdf_distance: pdf_distance(&r.pdf, &g.pdf)?,
                    temporal_corr_mae,
                    lag1_autocorrelation_diff,
                    energy_relative_error: (g.mean_daily_energy - r.mean_daily_energy).abs()
                        / r.mean_daily_energy.abs(),
                    autocorrelation: Paired {
                        real: r.autocorrelation,
                        generated: g.autocorrelation,
                    },
                    psd: Paired {
                        real: r.psd,
                        generated: g.psd,
                    },
                    duration_curve: Paired {
                        real: r.duration_curve,
                        generated: g.duration_curve,
                    },
                    temporal_corr: Paired {
                        real: r.temporal_corr,
                        generated: g.temporal_corr,
                    },
                    pdf: Paired {
                        real: r.pdf,
                        generated: g.pdf,
                    },
                    mean_daily_energy: Paired {
                        real: r.mean_daily_energy,
                        generated: g.mean_daily_energy,
                    },
                },
            );
        }
        let cr = cross_load_matrix(real)?;
        let cg = cross_load_matrix(generated)?;
        Ok(Self {
            config: *cfg,
            real_count: real.len(),
            generated_count: generated.len(),
            classes,
            cross_corr: CrossCorr {
                real: cr,
                generated: cg,
                max_error: max_abs_error(&cr, &cg),
            },
        })
    }

    pub fn class(&self, class: LoadClass) -> &ClassReport {
        &self.classes[&class]
    }

    /// Short plain-text summary of the headline numbers.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "real samples: {}, generated samples: {}\n\n",
            self.real_count, self.generated_count
        ));
        s.push_str("cross-load Pearson (real | generated)\n");
        for (i, class) in LoadClass::ALL.iter().enumerate() {
            let fmt = |row: &[f64; 3]| row.iter().map(|v| format!("{v:>7.3}")).collect::<String>();
            s.push_str(&format!(
                "  {:<8}{}  |{}\n",
                class.name(),
                fmt(&self.cross_corr.real[i]),
                fmt(&self.cross_corr.generated[i])
            ));
        }
        s.push_str(&format!("  max error: {:.3}\n\n", self.cross_corr.max_error));
        s.push_str("class     pdf_dist  tcorr_mae  lag1_diff  energy_real  energy_gen  energy_err\n");
        for (class, r) in &self.classes {
            s.push_str(&format!(
                "{:<9} {:>8.4}  {:>9.4}  {:>9.4}  {:>11.3}  {:>10.3}  {:>9.2}%\n",
                class.name(),
                r.pdf_distance,
                r.temporal_corr_mae,
                r.lag1_autocorrelation_diff,
                r.mean_daily_energy.real,
                r.mean_daily_energy.generated,
                100.0 * r.energy_relative_error
            ));
        }
        s
    }
}
