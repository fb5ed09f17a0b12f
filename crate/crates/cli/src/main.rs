//! `calens`: fit, evaluate, simulate, and verify calibrated two-model
//! ensembles from the command line.
//!
//! Exit codes: 0 success, 1 a verification ran and failed, 2 parse or
//! format problems, 3 empty inputs, 4 misaligned inputs, 5 unknown
//! strategy.

mod commands;
mod config;
mod error;
mod scorefile;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "calens",
    version,
    about = "Calibrated ensembling of a standard and a robust classifier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a temperature by confidence matching on one score file.
    FitTemperature(commands::fit::FitArgs),
    /// Fit a combination strategy and evaluate it next to its base models.
    Ensemble(commands::ensemble::EnsembleArgs),
    /// Sample score files from a synthetic world.
    Simulate(commands::simulate::SimulateArgs),
    /// Run one verification suite and print its verdict as JSON.
    Verify(commands::verify::VerifyArgs),
    /// Merge ensemble reports into one comparison table.
    Report(commands::report::ReportArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::FitTemperature(args) => commands::fit::run(args),
        Command::Ensemble(args) => commands::ensemble::run(args),
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Verify(args) => commands::verify::run(args),
        Command::Report(args) => commands::report::run(args),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
