//! `driveprof`: ingest, synthesize, train, score and evaluate.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime
//! error.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use driveprof_core::eval::ReportFormat;

use failure::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "driveprof",
    version,
    about = "Driver behavior profiling from IMU residuals"
)]
struct Cli {
    /// Log progress to stderr (RUST_LOG overrides).
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,

    /// Override one key, e.g. `--set train.epochs=5`. Repeatable; beats the
    /// config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Dataset directory; same as `--set data_dir=...`.
    #[arg(long)]
    data: Option<PathBuf>,

    /// Output directory.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate session directories and print their summaries.
    Ingest {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Write synthetic sessions in the ingest file layout.
    Synth {
        #[arg(short, long)]
        out: PathBuf,
        /// Suite spec file; the standard suite when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Add a session whose labeled events carry no signal.
        #[arg(long)]
        null: bool,
    },
    /// Train one detector on normal windows.
    Train(ConfigArgs),
    /// Score every window of a dataset with a trained detector.
    Score {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scaler: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Scores file (`session,origin,error,label`).
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        rate_hz: u32,
    },
    /// Train (or load) one detector per window size and build the AUC grid.
    Eval(ConfigArgs),
    /// Render a grid file as a table or CSV.
    Report {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn resolve(args: &ConfigArgs) -> Result<(config::RunConfig, config::ConfigSource), Failure> {
    let mut overrides = args.overrides.clone();
    if let Some(data) = &args.data {
        let quoted = toml::Value::String(data.to_string_lossy().into_owned()).to_string();
        overrides.push(format!("data_dir={quoted}"));
    }
    config::resolve(args.config.as_deref(), &overrides)
}

fn run(cli: Cli) -> commands::CmdResult {
    match cli.command {
        Command::Ingest { paths } => commands::ingest(&paths),
        Command::Synth {
            out,
            spec,
            seed,
            null,
        } => commands::synth(&out, spec.as_deref(), seed, null),
        Command::Train(args) => {
            let (cfg, src) = resolve(&args)?;
            commands::train_cmd(&cfg, &src, &args.out)
        }
        Command::Score {
            checkpoint,
            scaler,
            data,
            out,
            rate_hz,
        } => commands::score(&checkpoint, &scaler, &data, &out, rate_hz),
        Command::Eval(args) => {
            let (cfg, src) = resolve(&args)?;
            commands::eval(&cfg, &src, &args.out)
        }
        Command::Report { grid, format, out } => {
            let format = match format {
                Format::Table => ReportFormat::Table,
                Format::Csv => ReportFormat::Csv,
            };
            commands::report(&grid, format, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("driveprof: {failure}");
            failure.exit_code()
        }
    }
}
