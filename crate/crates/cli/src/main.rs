//! `gmmn`: command-line front end for synthesizing load data, training the
//! GMMN, generating scenarios and evaluating them.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use gmmn::evaluation::EvalConfig;
use gmmn::pipeline::{self, RunConfig};
use gmmn::Error;

#[derive(Parser)]
#[command(name = "gmmn", version, about = "Cooling/heating/power load scenario generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic hourly load CSV and its targets sidecar.
    Synth {
        #[arg(long, default_value_t = 416)]
        days: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the auto-encoder and generator and write the model archive.
    Train(TrainArgs),
    /// Generate scenarios in physical units from a trained archive.
    Generate {
        #[arg(long)]
        archive: PathBuf,
        #[arg(long, default_value_t = 2000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare generated scenarios against the archive's held-out days.
    Evaluate {
        #[arg(long)]
        archive: PathBuf,
        /// Hourly CSV containing the held-out days.
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        generated: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long, default_value_t = 23)]
        max_lag: usize,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// Flat key = value config file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ae_epochs: Option<usize>,
    #[arg(long)]
    gen_epochs: Option<usize>,
    /// Extra `key=value` overrides, e.g. `--set gen.bandwidth=2.0`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl TrainArgs {
    fn to_config(&self) -> gmmn::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p).map_err(|e| match e {
                Error::Io { .. } => Error::Config(e.to_string()),
                other => other,
            })?,
            None => RunConfig::default(),
        };
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{kv}` is not key=value")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(p) = &self.data {
            cfg.data_path = p.clone();
        }
        if let Some(p) = &self.output_dir {
            cfg.output_dir = p.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(e) = self.ae_epochs {
            cfg.ae.epochs = e;
        }
        if let Some(e) = self.gen_epochs {
            cfg.gen.epochs = e;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::InvalidArgument(_)) => 1,
        Some(Error::Divergence(_) | Error::NonFinite(_)) => 3,
        Some(_) => 2,
        None => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth { days, seed, out } => {
            let ds = pipeline::write_synthetic_dataset(&out, days, seed)?;
            println!(
                "wrote {} hourly records to {} (targets in {})",
                ds.records.len(),
                out.display(),
                pipeline::sidecar_path(&out).display()
            );
        }
        Command::Train(args) => {
            let cfg = args.to_config()?;
            let outcome = pipeline::cmd_train(&cfg)?;
            println!(
                "auto-encoder final loss {:.6}, generator final MMD² {:.6}",
                outcome.run.model.training.ae_final_loss, outcome.run.model.training.gen_final_loss
            );
            println!("archive {} sha256 {}", outcome.archive_path.display(), outcome.digest);
        }
        Command::Generate {
            archive,
            count,
            seed,
            out,
        } => {
            let n = pipeline::cmd_generate(&archive, count, seed, &out)
                .with_context(|| format!("generating from {}", archive.display()))?;
            println!("wrote {n} scenarios to {}", out.display());
        }
        Command::Evaluate {
            archive,
            real,
            generated,
            out_dir,
            bins,
            max_lag,
        } => {
            let eval = EvalConfig { bins, max_lag };
            if bins == 0 || max_lag >= 24 {
                return Err(Error::Config("bins must be positive and max-lag below 24".into()).into());
            }
            let report = pipeline::cmd_evaluate(&archive, &real, &generated, &eval, &out_dir)?;
            print!("{}", report.summary());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
