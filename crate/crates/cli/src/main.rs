//! `bellsel`: generate Bell-experiment ensembles and diagnose their
//! correlations as selection effects.
//!
//! Pipelines are file-based: `vrun`/`wrun`/`toy` write ensembles (JSONL or
//! CSV) plus a manifest; `analyze` reads them back and runs the statistical
//! battery; `exact` prints the no-sampling closed forms; `forks` runs the
//! classical demonstrations.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod args;
mod cmd_analyze;
mod cmd_exact;
mod cmd_forks;
mod cmd_generate;
mod cmd_toy;
mod output;

#[derive(Parser)]
#[command(
    name = "bellsel",
    version,
    about = "Bell-experiment ensembles and selection-bias diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a V-shaped Bell-experiment ensemble
    Vrun(cmd_generate::VrunArgs),
    /// Generate a W-shaped entanglement-swapping ensemble
    Wrun(cmd_generate::WrunArgs),
    /// Classical toy models built from coin flips
    #[command(subcommand)]
    Toy(cmd_toy::ToyCommand),
    /// Run the statistical test battery over an ensemble file
    Analyze(cmd_analyze::AnalyzeArgs),
    /// Classical fork demonstrations
    #[command(subcommand)]
    Forks(cmd_forks::ForksCommand),
    /// Closed-form distributions, correlators, and CHSH (no sampling)
    Exact(cmd_exact::ExactArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Vrun(args) => cmd_generate::vrun(args),
        Command::Wrun(args) => cmd_generate::wrun(args),
        Command::Toy(command) => cmd_toy::run(command),
        Command::Analyze(args) => cmd_analyze::run(args),
        Command::Forks(command) => cmd_forks::run(command),
        Command::Exact(args) => cmd_exact::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
