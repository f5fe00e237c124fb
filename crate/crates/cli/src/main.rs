use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use trust_siot::config::RunConfig;
use trust_siot::error::{InStage, Stage};
use trust_siot::stages::{self, Layout, SweepAxis};
use trust_siot_core::synthetic::SyntheticConfig;

#[derive(Parser)]
#[command(name = "trust-siot", version, about = "Trust evaluation for SIoT interaction data")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one setting; repeatable, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory (same as `--set output=...`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Dataset manifest (same as `--set dataset=...`).
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Load a dataset and write the interaction log with its labels.
    Ingest,
    /// Direct trust of every interacting pair.
    Dtm,
    /// Credibility scores of every object.
    Credibility,
    /// Train relation embeddings.
    KgeTrain,
    /// Five trust features per labelled pair.
    Features,
    /// Select the hidden size and train the classifier.
    Train,
    /// Score the trained classifier on the held-out pairs.
    Evaluate,
    /// Refit across training fractions or interaction-count quantiles.
    Sweep {
        #[arg(long, default_value = "train_fraction")]
        axis: SweepAxis,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.6,0.7,0.8,0.9")]
        values: Vec<f64>,
    },
    /// Every stage in order, plus a run manifest.
    Pipeline,
    /// Write a synthetic certification dataset.
    Synth {
        /// Directory receiving ratings, triples and `dataset.txt`.
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value = "synthetic")]
        name: String,
        #[arg(long, default_value_t = 200)]
        objects: usize,
        #[arg(long, default_value_t = 8)]
        ratings_per_object: usize,
        #[arg(long, default_value_t = 0.1)]
        dishonest_fraction: f64,
        #[arg(long, default_value_t = 300)]
        siot_objects: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn config(common: &Common) -> Result<RunConfig> {
    let mut pairs = common.set.clone();
    if let Some(o) = &common.out {
        pairs.push(format!("output={}", o.display()));
    }
    if let Some(d) = &common.dataset {
        pairs.push(format!("dataset={}", d.display()));
    }
    Ok(RunConfig::load(
        common.config.as_deref(),
        std::env::vars(),
        pairs.iter().map(String::as_str),
    )
    .in_stage(Stage::Config)?)
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    if let Command::Synth {
        dir,
        name,
        objects,
        ratings_per_object,
        dishonest_fraction,
        siot_objects,
        seed,
    } = &cli.command
    {
        let cfg = SyntheticConfig {
            n_objects: *objects,
            ratings_per_object: *ratings_per_object,
            dishonest_fraction: *dishonest_fraction,
            n_siot_objects: *siot_objects,
            seed: *seed,
            ..SyntheticConfig::default()
        };
        let path = stages::synth(&cfg, dir, name)?;
        println!("{}", path.display());
        return Ok(());
    }
    let cfg = config(common)?;
    let out = Layout::new(&cfg.output);
    match cli.command {
        Command::Ingest => drop(stages::ingest(&cfg, &out)?),
        Command::Dtm => drop(stages::dtm(&cfg, &out)?),
        Command::Credibility => drop(stages::credibility(&cfg, &out)?),
        Command::KgeTrain => drop(stages::kge_train(&cfg, &out)?),
        Command::Features => drop(stages::features(&cfg, &out)?),
        Command::Train => drop(stages::train(&cfg, &out)?),
        Command::Evaluate => {
            let r = stages::evaluate_stage(&cfg, &out)?;
            println!(
                "f1={:.6} mae={:.6} mse={:.6} n_test={}",
                r.f1_micro, r.mae, r.mse, r.n_test
            );
        }
        Command::Sweep { axis, values } => {
            let rows = stages::sweep(&cfg, &out, axis, &values)?;
            print!(
                "{}",
                stages::sweep_csv(&stages::dataset_name(&cfg), axis, cfg.experiment.train_fraction, &rows)
            );
        }
        Command::Pipeline => {
            let p = stages::pipeline(&cfg, &out)?;
            let r = &p.report;
            println!(
                "f1={:.6} mae={:.6} mse={:.6} n_test={}",
                r.f1_micro, r.mae, r.mse, r.n_test
            );
        }
        Command::Synth { .. } => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
