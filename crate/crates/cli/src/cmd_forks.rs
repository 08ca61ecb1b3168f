//! `forks`: collider, digit-parity, and range-restriction demonstrations.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Subcommand};

use bellsel_core::forks::{
    collider_demo, load_digits, mice_demo, parity_correlator, synthetic_digit_pair, ForkReport,
};

use crate::args::{require_positive, require_probability, ReportFormatArg};

#[derive(Debug, Subcommand)]
pub enum ForksCommand {
    /// Two independent fair bits and their XOR; condition on the XOR
    Collider(ColliderArgs),
    /// Digit-parity correlations under the not-both-odd restriction
    Parity(ParityArgs),
    /// Range restriction: two conditions that occur only in white subjects
    Mice(MiceArgs),
}

#[derive(Debug, Args)]
pub struct ColliderArgs {
    /// Population size
    #[arg(long)]
    pub n: u64,
    /// RNG seed (BELLSEL_SEED is used when the flag is absent)
    #[arg(long, env = "BELLSEL_SEED")]
    pub seed: u64,
    /// Output format
    #[arg(long, value_enum, default_value_t = ReportFormatArg::Table)]
    pub format: ReportFormatArg,
}

#[derive(Debug, Args)]
pub struct ParityArgs {
    /// Use synthetic i.i.d. uniform digits instead of digit files
    #[arg(long, conflicts_with_all = ["digits_a", "digits_b"])]
    pub synthetic: bool,
    /// First digit file (plain text, non-digits ignored)
    #[arg(long = "digits-a", requires = "digits_b")]
    pub digits_a: Option<PathBuf>,
    /// Second digit file
    #[arg(long = "digits-b", requires = "digits_a")]
    pub digits_b: Option<PathBuf>,
    /// Number of digit positions to compare
    #[arg(long)]
    pub n: u64,
    /// RNG seed for --synthetic (BELLSEL_SEED is used when the flag is absent)
    #[arg(long, env = "BELLSEL_SEED")]
    pub seed: Option<u64>,
    /// Output format
    #[arg(long, value_enum, default_value_t = ReportFormatArg::Table)]
    pub format: ReportFormatArg,
}

#[derive(Debug, Args)]
pub struct MiceArgs {
    /// Population size
    #[arg(long)]
    pub n: u64,
    /// RNG seed (BELLSEL_SEED is used when the flag is absent)
    #[arg(long, env = "BELLSEL_SEED")]
    pub seed: u64,
    /// Probability a subject is white
    #[arg(long = "p-white", default_value_t = 0.5)]
    pub p_white: f64,
    /// Probability of condition K given white
    #[arg(long = "p-k", default_value_t = 0.2)]
    pub p_k: f64,
    /// Probability of condition L given white
    #[arg(long = "p-l", default_value_t = 0.2)]
    pub p_l: f64,
    /// Output format
    #[arg(long, value_enum, default_value_t = ReportFormatArg::Table)]
    pub format: ReportFormatArg,
}

fn print_report(report: &ForkReport, format: ReportFormatArg) -> Result<()> {
    match format {
        ReportFormatArg::Json => println!("{}", serde_json::to_string_pretty(report)?),
        ReportFormatArg::Table => print!("{}", report.to_table()),
    }
    Ok(())
}

pub fn run(command: ForksCommand) -> Result<()> {
    match command {
        ForksCommand::Collider(args) => {
            require_positive("--n", args.n)?;
            let report = collider_demo(args.n, args.seed)?;
            print_report(&report, args.format)
        }
        ForksCommand::Parity(args) => {
            require_positive("--n", args.n)?;
            let count = args.n as usize;
            let report = if args.synthetic {
                let seed = args
                    .seed
                    .ok_or_else(|| anyhow::anyhow!("--seed is required with --synthetic"))?;
                let (s1, s2) = synthetic_digit_pair(count, seed)?;
                parity_correlator(&s1, &s2)?
            } else {
                let (Some(path_a), Some(path_b)) = (&args.digits_a, &args.digits_b) else {
                    bail!("pass either --synthetic or both --digits-a and --digits-b");
                };
                let s1 = load_digits(path_a, count)?;
                let s2 = load_digits(path_b, count)?;
                parity_correlator(&s1, &s2)?
            };
            print_report(&report, args.format)
        }
        ForksCommand::Mice(args) => {
            require_positive("--n", args.n)?;
            require_probability("--p-white", args.p_white)?;
            require_probability("--p-k", args.p_k)?;
            require_probability("--p-l", args.p_l)?;
            let report = mice_demo(args.n, args.seed, args.p_white, args.p_k, args.p_l)?;
            print_report(&report, args.format)
        }
    }
}
