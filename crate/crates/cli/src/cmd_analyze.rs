//! `analyze`: run the statistical test battery over an ensemble file.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde_json::{Map, Value};

use bellsel_core::analysis::{
    estimate_chsh_grouped, factorizability_check, msbc_test, no_signalling_check, GroupBy,
};
use bellsel_core::ensemble::read_ensemble_path;

use crate::args::ReportFormatArg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupByArg {
    None,
    Sel,
}

impl GroupByArg {
    fn group_by(self) -> GroupBy {
        match self {
            GroupByArg::None => GroupBy::None,
            GroupByArg::Sel => GroupBy::Selection,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportKind {
    Chsh,
    Msbc,
    Nosignal,
    Factorizability,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Input ensemble file (.jsonl or .csv)
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Group records by selection label before estimating
    #[arg(long = "group-by", value_enum, default_value_t = GroupByArg::None)]
    pub group_by: GroupByArg,
    /// Reports to run (comma list)
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "chsh,msbc,nosignal,factorizability"
    )]
    pub report: Vec<ReportKind>,
    /// Significance threshold in standard errors
    #[arg(long, default_value_t = 4.0)]
    pub z: f64,
    /// Output format
    #[arg(long, value_enum, default_value_t = ReportFormatArg::Table)]
    pub format: ReportFormatArg,
}

pub fn run(args: AnalyzeArgs) -> Result<()> {
    if !(args.z.is_finite() && args.z > 0.0) {
        anyhow::bail!("--z must be a positive finite number, got {}", args.z);
    }
    let ensemble = read_ensemble_path(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let group_by = args.group_by.group_by();

    let mut kinds = args.report.clone();
    kinds.dedup();

    let mut json = Map::new();
    let mut tables = Vec::new();
    for kind in kinds {
        match kind {
            ReportKind::Chsh => {
                let estimates = estimate_chsh_grouped(&ensemble, group_by, args.z)?;
                for est in &estimates {
                    tables.push(est.to_table());
                }
                json.insert("chsh".into(), serde_json::to_value(&estimates)?);
            }
            ReportKind::Msbc => {
                let report = msbc_test(&ensemble, args.z)?;
                tables.push(report.to_table());
                json.insert("msbc".into(), serde_json::to_value(&report)?);
            }
            ReportKind::Nosignal => {
                let report = no_signalling_check(&ensemble, group_by, args.z)?;
                tables.push(report.to_table());
                json.insert("nosignal".into(), serde_json::to_value(&report)?);
            }
            ReportKind::Factorizability => {
                let report = factorizability_check(&ensemble, group_by, args.z)?;
                tables.push(report.to_table());
                json.insert("factorizability".into(), serde_json::to_value(&report)?);
            }
        }
    }

    match args.format {
        ReportFormatArg::Json => println!("{}", serde_json::to_string_pretty(&Value::Object(json))?),
        ReportFormatArg::Table => print!("{}", tables.join("\n")),
    }
    Ok(())
}
