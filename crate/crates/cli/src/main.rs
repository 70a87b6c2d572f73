//! Course retention pipeline: simulate or ingest interaction logs, analyze
//! dropout correlates, build prediction datasets, train and evaluate the
//! staged predictor, send recall emails, and measure their effect.

mod commands;
mod config;
mod error;
mod http;
mod workspace;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::config::RetainConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "retain", version, about = "Retention pipeline for interactive text courses")]
struct Cli {
    /// Configuration file (TOML); built-in defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic cohort log with ground-truth outcomes.
    Simulate(commands::simulate::SimulateArgs),
    /// Validate an interaction log and store a normalized copy.
    Ingest(commands::ingest::IngestArgs),
    /// Correlate student traits and engagement with course progress.
    Analyze(commands::analyze::AnalyzeArgs),
    /// Enumerate labeled (history, horizon) prediction instances.
    BuildDataset(commands::dataset::BuildDatasetArgs),
    /// Train the dropout classifier on a labeled dataset.
    Train(commands::train::TrainArgs),
    /// Predict dropout risk for one student.
    Predict(commands::predict::PredictArgs),
    /// Score a model or benchmark prompt strategies on a dataset.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Draft and deliver recall emails to at-risk students.
    Intervene(commands::intervene::InterveneArgs),
    /// Compare login activity and engagement around an intervention.
    Measure(commands::measure::MeasureArgs),
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let config = RetainConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Simulate(args) => commands::simulate::run(args, &config),
        Command::Ingest(args) => commands::ingest::run(args, &config),
        Command::Analyze(args) => commands::analyze::run(args, &config),
        Command::BuildDataset(args) => commands::dataset::run(args, &config),
        Command::Train(args) => commands::train::run(args, &config),
        Command::Predict(args) => commands::predict::run(args, &config),
        Command::Evaluate(args) => commands::evaluate::run(args, &config),
        Command::Intervene(args) => commands::intervene::run(args, &config),
        Command::Measure(args) => commands::measure::run(args, &config),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprint!("{e}");
            std::process::exit(64);
        }
    };
    if let Err(e) = dispatch(&cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
