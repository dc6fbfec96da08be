//! `fspde`: theory tables, simulation, estimation and Monte Carlo
//! experiments for fractional SPDE drift estimation.
//!
//! Exit codes: 0 success, 1 execution error, 2 a threshold check failed,
//! 3 degenerate normalizer. Errors go to stderr as `error[category]: ...`.

mod commands;
mod configs;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fspde_core::ExperimentKind;

#[derive(Parser, Debug)]
#[command(
    name = "fspde",
    version,
    about = "Drift estimation for linear SPDEs driven by fractional noise"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON config: a file path or an inline object.
    #[arg(long, global = true)]
    pub config: Option<String>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "fspde-out")]
    pub out: PathBuf,
    /// Format of the summary printed on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Covariance traces, asymptotic constants and rate tables for a model.
    Theory,
    /// Simulates one trajectory and writes it as CSV plus a binary cache.
    Simulate,
    /// Estimates the drift from a trajectory CSV.
    Estimate {
        /// Trajectory CSV; overrides `input` in the config.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Runs a Monte Carlo experiment.
    Experiment {
        #[arg(value_enum)]
        kind: KindArg,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum KindArg {
    Consistency,
    Clt,
    #[value(alias = "moment-clt")]
    MomentClt,
    Cumulants,
    Rosenblatt,
    #[value(alias = "degenerate-projection")]
    DegenerateProjection,
}

impl From<KindArg> for ExperimentKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Consistency => ExperimentKind::Consistency,
            KindArg::Clt => ExperimentKind::Clt,
            KindArg::MomentClt => ExperimentKind::MomentClt,
            KindArg::Cumulants => ExperimentKind::Cumulants,
            KindArg::Rosenblatt => ExperimentKind::Rosenblatt,
            KindArg::DegenerateProjection => ExperimentKind::DegenerateProjection,
        }
    }
}

/// Failure of a command, with its stderr category and exit code.
#[derive(Debug)]
pub struct Failure {
    pub category: String,
    pub message: String,
    pub code: u8,
}

impl Failure {
    pub fn new(category: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            category: category.into(),
            message: message.into(),
            code: 1,
        }
    }
}

impl From<fspde_core::Error> for Failure {
    fn from(e: fspde_core::Error) -> Self {
        let code = if matches!(e, fspde_core::Error::Degenerate { .. }) {
            3
        } else {
            1
        };
        Self {
            category: e.category().to_string(),
            message: e.to_string(),
            code,
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new("io", e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::new("json", e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return ExitCode::from(1);
        }
    };
    if let Some(k) = cli.threads {
        if k == 0 {
            eprintln!("error[usage]: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error[threads]: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error[{}]: {}", f.category, f.message);
            ExitCode::from(f.code)
        }
    }
}
