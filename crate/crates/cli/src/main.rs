//! `bugcast`: fetch weekly bug counts, diagnose them, and race forecasting
//! models against the naive baseline.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};

use bugcast_core::eval::DEFAULT_HORIZON;
use bugcast_core::{Error, Result};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "bugcast", version, about = "Weekly bug-count forecasting toolkit")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "config/mozilla-2010-2019.toml")]
    config: PathBuf,
    /// Global seed offset added to every model seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download bug records and write the weekly series snapshot.
    Fetch {
        /// First day of the collection range (inclusive), YYYY-MM-DD.
        #[arg(long)]
        from: NaiveDate,
        /// End of the collection range (exclusive at midnight), YYYY-MM-DD.
        #[arg(long)]
        to: NaiveDate,
    },
    /// Stationarity diagnostics: ADF test plus ACF/PACF correlograms.
    Diagnose,
    /// Rolling one-step comparison of all configured models, then the
    /// 13-week horizon sweep.
    Evaluate,
    /// Fit one model (or load a saved one) and forecast future weeks.
    Forecast {
        /// Steps ahead to forecast.
        #[arg(long, default_value_t = DEFAULT_HORIZON)]
        horizon: usize,
        /// Label of the configured model to fit; defaults to the first entry.
        #[arg(long)]
        model: Option<String>,
        /// Forecast from a saved model file instead of fitting.
        #[arg(long, conflicts_with = "model")]
        model_file: Option<PathBuf>,
        /// Save the fitted model to this path.
        #[arg(long)]
        save_model: Option<PathBuf>,
    },
    /// Pretty-print a previously written report.json.
    Report {
        /// Report path; defaults to <out-dir>/report.json.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn run(cli: &Cli) -> Result<()> {
    let config = RunConfig::load(&cli.config)?;
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| config.out_dir.clone());
    match &cli.command {
        Command::Fetch { from, to } => commands::cmd_fetch(&config, &out_dir, *from, *to),
        Command::Diagnose => commands::cmd_diagnose(&config, &out_dir),
        Command::Evaluate => commands::cmd_evaluate(&config, &out_dir, cli.seed),
        Command::Forecast {
            horizon,
            model,
            model_file,
            save_model,
        } => commands::cmd_forecast(
            &config,
            &out_dir,
            cli.seed,
            *horizon,
            model.as_deref(),
            model_file.as_deref(),
            save_model.as_deref(),
        ),
        Command::Report { input } => commands::cmd_report(&out_dir, input.as_deref()),
    }
}

/// Exit codes: 1 for internal numerical failures, 2 for I/O and network
/// trouble, 3 for validation and insufficient-data errors.
fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Io { .. } | Error::Network { .. } | Error::MalformedResponse { .. } => 2,
        Error::DegenerateRegression(_)
        | Error::RankDeficient(_)
        | Error::Shape { .. }
        | Error::Divergence { .. } => 1,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .format_target(false)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            let mut cause = std::error::Error::source(&error);
            while let Some(c) = cause {
                eprintln!("  caused by: {c}");
                cause = c.source();
            }
            ExitCode::from(exit_code(&error))
        }
    }
}
