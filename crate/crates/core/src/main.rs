use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pulsecorr::commands;
use pulsecorr::config::{ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(
    name = "pulsecorr",
    version,
    about = "Learn and analyse drift-compensating control pulses for a two-qubit system"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Experiment config file (TOML); flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out", global = true)]
    out: PathBuf,
    /// Worker thread cap (defaults to machine parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Drift spec, e.g. "sy", "0.8sx+0.2sy", "idsy", "0.1sxsx+0.8sysy+0.1szsz".
    #[arg(long, global = true)]
    drift: Option<String>,
    /// Drift strength multiplying the whole drift operator.
    #[arg(long, global = true)]
    gamma: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an (NCP, target) corpus and split it into train/test files.
    GenData {
        #[command(flatten)]
        common: Common,
        /// Seed for corpus generation.
        #[arg(long)]
        seed_data: Option<u64>,
        #[arg(long)]
        train_count: Option<usize>,
        #[arg(long)]
        test_count: Option<usize>,
        /// Also optimize and store drift-compensating pulses per record.
        #[arg(long)]
        with_dcp: bool,
        /// Lindblad preset: none, lind1, lind2, lind3.
        #[arg(long)]
        lindblad: Option<String>,
        #[arg(long)]
        lindblad_rate: Option<f64>,
    },
    /// Train the correction network on a generated dataset.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset directory produced by gen-data.
        #[arg(long)]
        data: PathBuf,
        /// Seed for weight init and batch shuffling.
        #[arg(long)]
        seed_train: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        hidden_dim: Option<usize>,
    },
    /// Evaluate a checkpoint on a dataset's test split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Replay the stored DCPs instead of the network (debug baseline).
        #[arg(long)]
        oracle_dcp: bool,
    },
    /// Perturbation-sensitivity scan of a trained model.
    Scan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Perturbation size.
        #[arg(long)]
        eps: Option<f64>,
    },
}

fn resolve_config(common: &Common, overrides: Overrides) -> Result<ExperimentConfig, pulsecorr::Error> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(&Overrides {
        drift: common.drift.clone().or(overrides.drift),
        gamma: common.gamma.or(overrides.gamma),
        ..overrides
    });
    Ok(cfg)
}

fn init_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool initialized once");
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable outcome"));
}

fn run() -> Result<(), pulsecorr::Error> {
    match Cli::parse().command {
        Command::GenData {
            common,
            seed_data,
            train_count,
            test_count,
            with_dcp,
            lindblad,
            lindblad_rate,
        } => {
            init_threads(common.threads);
            let cfg = resolve_config(
                &common,
                Overrides {
                    seed_data,
                    train_count,
                    test_count,
                    with_dcp: with_dcp.then_some(true),
                    lindblad,
                    lindblad_rate,
                    ..Overrides::default()
                },
            )?;
            let outcome = commands::cmd_gen_data(&cfg, &common.out)?;
            print_json(&outcome);
        }
        Command::Train {
            common,
            data,
            seed_train,
            epochs,
            batch_size,
            hidden_dim,
        } => {
            init_threads(common.threads);
            let cfg = resolve_config(
                &common,
                Overrides {
                    seed_train,
                    epochs,
                    batch_size,
                    hidden_dim,
                    ..Overrides::default()
                },
            )?;
            let outcome = commands::cmd_train(&cfg, &data, &common.out)?;
            print_json(&outcome);
        }
        Command::Eval {
            common,
            checkpoint,
            data,
            oracle_dcp,
        } => {
            init_threads(common.threads);
            let cfg = resolve_config(&common, Overrides::default())?;
            let outcome = commands::cmd_eval(&checkpoint, &data, &common.out, oracle_dcp, &cfg)?;
            print_json(&outcome);
        }
        Command::Scan {
            common,
            checkpoint,
            data,
            eps,
        } => {
            init_threads(common.threads);
            let cfg = resolve_config(
                &common,
                Overrides {
                    eps,
                    ..Overrides::default()
                },
            )?;
            let outcome = commands::cmd_scan(&checkpoint, &data, &common.out, &cfg)?;
            print_json(&outcome);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
