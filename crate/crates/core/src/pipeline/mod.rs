//! End-to-end commands: synthesize data, train, generate, evaluate.

mod archive;
mod config;
mod io;
mod synth;

pub use archive::{file_digest, Architecture, GmmnModel, ModelArchive, TrainingMetadata, FORMAT_VERSION};
pub use config::{AeStage, GenStage, RunConfig};
pub use io::write_atomic;
pub use synth::{
    make_synthetic_dataset, records_to_csv, sidecar_path, write_synthetic_dataset, SyntheticDataset,
    SyntheticTargets, MIN_DAYS,
};

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::info;

use crate::autoencoder::{train_autoencoder, AutoEncoder, TrainConfig};
use crate::dataset::{
    assemble_daily_samples, fit_normalizer, load_csv, split_train_test, LoadClass, LoadRecord, LoadSample,
    Normalizer, HOURS, SAMPLE_LEN,
};
use crate::error::{Error, Result};
use crate::evaluation::{psd_frequencies, MetricReport};
use crate::generator::{sample_noise, train_generator, GeneratorTrainConfig, ScenarioGenerator};
use crate::tensor::Tensor;

pub const ARCHIVE_FILE: &str = "model.json";
pub const AE_LOSS_FILE: &str = "ae_loss.csv";
pub const GEN_LOSS_FILE: &str = "gen_loss.csv";
pub const REPORT_FILE: &str = "report.json";
pub const SUMMARY_FILE: &str = "summary.txt";

/// Derives an independent stream seed for one pipeline stage.
pub fn stage_seed(seed: u64, stage: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed.wrapping_add(stage.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const SPLIT_STAGE: u64 = 1;
const AE_INIT_STAGE: u64 = 2;
const AE_TRAIN_STAGE: u64 = 3;
const GEN_INIT_STAGE: u64 = 4;
const GEN_TRAIN_STAGE: u64 = 5;

/// Daily samples split into train/test with a normalizer fitted on train.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Vec<LoadSample>,
    pub test: Vec<LoadSample>,
    pub normalizer: Normalizer,
    pub skipped_rows: usize,
    pub skipped_days: usize,
}

impl PreparedData {
    pub fn train_tensor(&self) -> Result<Tensor> {
        self.normalizer.normalize_batch(&self.train)
    }
}

pub fn prepare_records(records: &[LoadRecord], split_fraction: f64, seed: u64) -> Result<PreparedData> {
    let days = assemble_daily_samples(records);
    let (train, test) = split_train_test(&days.samples, split_fraction, stage_seed(seed, SPLIT_STAGE))?;
    let normalizer = fit_normalizer(&train)?;
    Ok(PreparedData {
        train,
        test,
        normalizer,
        skipped_rows: 0,
        skipped_days: days.skipped_days,
    })
}

pub fn prepare_data(cfg: &RunConfig) -> Result<PreparedData> {
    let load = load_csv(&cfg.data_path)?;
    let mut data = prepare_records(&load.records, cfg.split_fraction, cfg.seed)?;
    data.skipped_rows = load.skipped_rows;
    Ok(data)
}

/// The generator a run starts from, before any training.
pub fn initial_generator(cfg: &RunConfig) -> Result<ScenarioGenerator> {
    ScenarioGenerator::new(cfg.gen.noise_dim, stage_seed(cfg.seed, GEN_INIT_STAGE))
}

#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub model: GmmnModel,
    pub ae_losses: Vec<f64>,
    pub gen_losses: Vec<f64>,
    pub ae_duration: Duration,
    pub gen_duration: Duration,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub run: TrainedRun,
    pub archive_path: PathBuf,
    pub digest: String,
}

/// Trains the auto-encoder and the generator on already prepared data.
pub fn train_model(cfg: &RunConfig, data: &PreparedData) -> Result<TrainedRun> {
    cfg.validate()?;
    let train = data.train_tensor()?;
    info!("training auto-encoder on {} days", train.rows());
    let started = Instant::now();
    let mut ae = AutoEncoder::new(stage_seed(cfg.seed, AE_INIT_STAGE))?;
    let ae_losses = train_autoencoder(
        &mut ae,
        &train,
        &TrainConfig {
            epochs: cfg.ae.epochs,
            batch_size: cfg.ae.batch_size,
            learning_rate: cfg.ae.learning_rate,
            seed: stage_seed(cfg.seed, AE_TRAIN_STAGE),
        },
    )?;
    let ae_duration = started.elapsed();
    let encoder = ae.freeze_encoder()?;

    info!("training generator");
    let started = Instant::now();
    let mut gen = initial_generator(cfg)?;
    let gen_run = train_generator(
        &mut gen,
        &encoder,
        &train,
        &GeneratorTrainConfig {
            epochs: cfg.gen.epochs,
            batch_size: cfg.gen.batch_size,
            learning_rate: cfg.gen.learning_rate,
            bandwidth: cfg.gen.bandwidth,
            seed: stage_seed(cfg.seed, GEN_TRAIN_STAGE),
        },
    )?;
    let gen_duration = started.elapsed();

    let dates = |s: &[LoadSample]| s.iter().map(|x| x.date.to_string()).collect::<Vec<_>>();
    let model = GmmnModel {
        autoencoder: ae,
        generator: gen,
        normalizer: data.normalizer.clone(),
        training: TrainingMetadata {
            seed: cfg.seed,
            split_fraction: cfg.split_fraction,
            ae_epochs: cfg.ae.epochs,
            gen_epochs: cfg.gen.epochs,
            ae_final_loss: *ae_losses.last().expect("epochs >= 1"),
            gen_final_loss: *gen_run.losses.last().expect("epochs >= 1"),
            bandwidth: gen_run.bandwidth,
            train_dates: dates(&data.train),
            test_dates: dates(&data.test),
        },
    };
    Ok(TrainedRun {
        model,
        ae_losses,
        gen_losses: gen_run.losses,
        ae_duration,
        gen_duration,
    })
}

fn loss_csv(losses: &[f64]) -> String {
    let mut s = String::from("epoch,loss\n");
    for (i, l) in losses.iter().enumerate() {
        s.push_str(&format!("{},{l}\n", i + 1));
    }
    s
}

/// Process data, train both networks, and write the archive plus loss
/// histories. Nothing is written unless training succeeds.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    let run = train_model(cfg, &data)?;
    let archive_path = cfg.output_dir.join(ARCHIVE_FILE);
    run.model.save(&archive_path)?;
    write_atomic(&cfg.output_dir.join(AE_LOSS_FILE), loss_csv(&run.ae_losses).as_bytes())?;
    write_atomic(&cfg.output_dir.join(GEN_LOSS_FILE), loss_csv(&run.gen_losses).as_bytes())?;
    let digest = file_digest(&archive_path)?;
    info!("archive written to {} (sha256 {digest})", archive_path.display());
    Ok(TrainOutcome {
        run,
        archive_path,
        digest,
    })
}

/// Physical-unit scenarios from `count` noise draws.
pub fn generate_scenarios(model: &GmmnModel, count: usize, seed: u64) -> Result<Vec<[f64; SAMPLE_LEN]>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let noise = sample_noise(count, model.generator.noise_dim(), seed)?;
    let normalized = model.generator.generate(&noise)?;
    (0..count).map(|i| model.normalizer.invert(normalized.row(i))).collect()
}

pub fn scenario_header() -> Vec<String> {
    LoadClass::ALL
        .iter()
        .flat_map(|c| (0..HOURS).map(move |h| format!("{}_{h:02}", c.name())))
        .collect()
}

pub fn scenarios_to_csv<S: AsRef<[f64]>>(scenarios: &[S]) -> String {
    let mut s = scenario_header().join(",");
    s.push('\n');
    for row in scenarios {
        let cells: Vec<String> = row.as_ref().iter().map(|v| v.to_string()).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn read_scenarios_csv(path: &Path) -> Result<Vec<[f64; SAMPLE_LEN]>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header != scenario_header() {
        return Err(Error::Data(format!("{}: unexpected scenario header", path.display())));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| Error::Data(format!("{} row {}: {e}", path.display(), i + 2)))?;
        let mut values = [0.0; SAMPLE_LEN];
        for (k, v) in values.iter_mut().enumerate() {
            *v = row
                .get(k)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Data(format!("{} row {}: bad value in column {k}", path.display(), i + 2)))?;
        }
        out.push(values);
    }
    Ok(out)
}

/// Writes `count` scenarios to `out` as CSV.
pub fn cmd_generate(archive: &Path, count: usize, seed: u64, out: &Path) -> Result<usize> {
    let model = GmmnModel::load(archive)?;
    let scenarios = generate_scenarios(&model, count, seed)?;
    write_atomic(out, scenarios_to_csv(&scenarios).as_bytes())?;
    Ok(scenarios.len())
}

/// Held-out days from `records` that the archive recorded as its test split.
/// Training days are never returned.
pub fn reference_samples(model: &GmmnModel, records: &[LoadRecord]) -> Result<Vec<LoadSample>> {
    let test: BTreeSet<&str> = model.training.test_dates.iter().map(String::as_str).collect();
    let train: BTreeSet<&str> = model.training.train_dates.iter().map(String::as_str).collect();
    if let Some(d) = test.intersection(&train).next() {
        return Err(Error::Archive(format!("day {d} is recorded as both train and test")));
    }
    let samples: Vec<LoadSample> = assemble_daily_samples(records)
        .samples
        .into_iter()
        .filter(|s| test.contains(s.date.to_string().as_str()))
        .collect();
    if samples.len() < 2 {
        return Err(Error::Data(format!(
            "only {} held-out day(s) found in the real data; need at least 2",
            samples.len()
        )));
    }
    Ok(samples)
}

fn plot_csvs(report: &MetricReport) -> Vec<(&'static str, String)> {
    let classes = LoadClass::ALL;
    let header = |first: &str| {
        let mut h = vec![first.to_string()];
        for c in classes {
            h.push(format!("{}_real", c.name()));
            h.push(format!("{}_generated", c.name()));
        }
        h.join(",") + "\n"
    };
    let series = |first: &str, xs: &[String], get: &dyn Fn(LoadClass) -> (Vec<f64>, Vec<f64>)| {
        let mut s = header(first);
        let cols: Vec<(Vec<f64>, Vec<f64>)> = classes.iter().map(|&c| get(c)).collect();
        for (i, x) in xs.iter().enumerate() {
            s.push_str(x);
            for (r, g) in &cols {
                s.push_str(&format!(",{},{}", r[i], g[i]));
            }
            s.push('\n');
        }
        s
    };

    let lags: Vec<String> = (0..=report.config.max_lag).map(|l| l.to_string()).collect();
    let freqs: Vec<String> = psd_frequencies(HOURS).iter().map(|f| f.to_string()).collect();
    let ranks: Vec<String> = (1..=HOURS).map(|h| h.to_string()).collect();
    let pdf0 = &report.class(LoadClass::Cooling).pdf.real;
    let centers: Vec<String> = pdf0.bin_centers().iter().map(|c| c.to_string()).collect();

    let mut temporal = String::from("hour_i,hour_j");
    for c in classes {
        temporal.push_str(&format!(",{0}_real,{0}_generated", c.name()));
    }
    temporal.push('\n');
    for i in 0..HOURS {
        for j in 0..HOURS {
            temporal.push_str(&format!("{i},{j}"));
            for c in classes {
                let t = &report.class(c).temporal_corr;
                temporal.push_str(&format!(",{},{}", t.real[i][j], t.generated[i][j]));
            }
            temporal.push('\n');
        }
    }
    let mut cross = String::from("row,col,real,generated\n");
    for (i, a) in classes.iter().enumerate() {
        for (j, b) in classes.iter().enumerate() {
            cross.push_str(&format!(
                "{},{},{},{}\n",
                a.name(),
                b.name(),
                report.cross_corr.real[i][j],
                report.cross_corr.generated[i][j]
            ));
        }
    }

    vec![
        (
            "autocorrelation.csv",
            series("lag", &lags, &|c| {
                let a = &report.class(c).autocorrelation;
                (a.real.clone(), a.generated.clone())
            }),
        ),
        (
            "psd.csv",
            series("frequency", &freqs, &|c| {
                let a = &report.class(c).psd;
                (a.real.clone(), a.generated.clone())
            }),
        ),
        (
            "duration_curve.csv",
            series("hour", &ranks, &|c| {
                let a = &report.class(c).duration_curve;
                (a.real.clone(), a.generated.clone())
            }),
        ),
        (
            "pdf.csv",
            series("bin", &centers, &|c| {
                let a = &report.class(c).pdf;
                (a.real.density.clone(), a.generated.density.clone())
            }),
        ),
        ("temporal_corr.csv", temporal),
        ("cross_corr.csv", cross),
    ]
}

/// Compares generated scenarios with the archive's held-out real days and
/// writes the JSON report, plot tables and a text summary into `out_dir`.
pub fn cmd_evaluate(
    archive: &Path,
    real_csv: &Path,
    generated_csv: &Path,
    eval: &crate::evaluation::EvalConfig,
    out_dir: &Path,
) -> Result<MetricReport> {
    let model = GmmnModel::load(archive)?;
    let records = load_csv(real_csv)?.records;
    let real = reference_samples(&model, &records)?;
    let generated = read_scenarios_csv(generated_csv)?;
    if generated.len() < 2 {
        return Err(Error::Data("need at least 2 generated scenarios".into()));
    }
    let real_values: Vec<&[f64]> = real.iter().map(|s| &s.values[..]).collect();
    let report = MetricReport::compare(&real_values, &generated, &model.normalizer, eval)?;

    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_atomic(&out_dir.join(REPORT_FILE), json.as_bytes())?;
    for (name, body) in plot_csvs(&report) {
        write_atomic(&out_dir.join(name), body.as_bytes())?;
    }
    write_atomic(&out_dir.join(SUMMARY_FILE), report.summary().as_bytes())?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_seeds_differ() {
        let s: BTreeSet<u64> = (0..6).map(|k| stage_seed(42, k)).collect();
        assert_eq!(s.len(), 6);
        assert_eq!(stage_seed(42, 3), stage_seed(42, 3));
    }

    #[test]
    fn scenario_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![[0.1f64; SAMPLE_LEN], [1.0 / 3.0; SAMPLE_LEN]];
        let path = dir.path().join("s.csv");
        write_atomic(&path, scenarios_to_csv(&rows).as_bytes()).unwrap();
        assert_eq!(read_scenarios_csv(&path).unwrap(), rows);

        let header = scenario_header();
        assert_eq!(header.len(), 72);
        assert_eq!(header[0], "cooling_00");
        assert_eq!(header[47], "heating_23");
        assert_eq!(header[71], "power_23");
    }
}
