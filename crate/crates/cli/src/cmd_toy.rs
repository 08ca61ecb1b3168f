//! `toy retention` and `toy hoppers`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Result;
use clap::{Args, Subcommand};
use serde::Serialize;

use bellsel_core::quantum::AngleConfig;
use bellsel_core::toy::{charlie_hoppers, charlie_retention};

use crate::args::{parse_angles, require_positive, FileFormatArg, FixedStateArg, RuleArg};
use crate::output::{hopper_path, sibling, write_ensemble_file, write_json_file, RunManifest};

#[derive(Debug, Subcommand)]
pub enum ToyCommand {
    /// Retain uniformly generated tuples with the target state's quantum
    /// probability (or only perfect matches)
    Retention(RetentionArgs),
    /// Sort uniformly generated tuples into four hoppers; nothing discarded
    Hoppers(HoppersArgs),
}

#[derive(Debug, Args)]
pub struct RetentionArgs {
    /// Number of tuples to generate before retention
    #[arg(long)]
    pub shots: u64,
    /// RNG seed (BELLSEL_SEED is used when the flag is absent)
    #[arg(long, env = "BELLSEL_SEED")]
    pub seed: u64,
    /// Target Bell state defining the retention probabilities
    #[arg(long, value_enum, default_value_t = FixedStateArg::C0)]
    pub state: FixedStateArg,
    /// Retention rule
    #[arg(long, value_enum, default_value_t = RuleArg::Qm)]
    pub rule: RuleArg,
    /// Analyzer angles a0,a1,b0,b1 in radians [default: 0,pi/4,pi/8,3pi/8]
    #[arg(long, value_parser = parse_angles)]
    pub angles: Option<AngleConfig>,
    /// Ensemble file format
    #[arg(long, value_enum, default_value_t = FileFormatArg::Jsonl)]
    pub format: FileFormatArg,
    /// Output path for the retained ensemble
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HoppersArgs {
    /// Number of tuples to generate and sort
    #[arg(long)]
    pub shots: u64,
    /// RNG seed (BELLSEL_SEED is used when the flag is absent)
    #[arg(long, env = "BELLSEL_SEED")]
    pub seed: u64,
    /// Analyzer angles a0,a1,b0,b1 in radians [default: 0,pi/4,pi/8,3pi/8]
    #[arg(long, value_parser = parse_angles)]
    pub angles: Option<AngleConfig>,
    /// Ensemble file format
    #[arg(long, value_enum, default_value_t = FileFormatArg::Jsonl)]
    pub format: FileFormatArg,
    /// Output path for the pooled ensemble; hoppers go to <stem>.h0..h3
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct RetentionSummary {
    attempted: u64,
    retained: u64,
    retention_rate: f64,
    rule: String,
    target: String,
}

#[derive(Serialize)]
struct HopperSummary {
    attempted: u64,
    counts: BTreeMap<String, u64>,
    occupancy: BTreeMap<String, f64>,
}

pub fn run(command: ToyCommand) -> Result<()> {
    match command {
        ToyCommand::Retention(args) => retention(args),
        ToyCommand::Hoppers(args) => hoppers(args),
    }
}

fn retention(args: RetentionArgs) -> Result<()> {
    let started = Instant::now();
    require_positive("--shots", args.shots)?;
    let angles = args.angles.unwrap_or_default();
    let result = charlie_retention(
        args.shots,
        args.seed,
        args.state.label(),
        &angles,
        args.rule.rule(),
    )?;
    write_ensemble_file(&result.retained, args.format.format(), &args.out)?;
    let summary = RetentionSummary {
        attempted: result.attempted,
        retained: result.retained_count,
        retention_rate: result.retained_count as f64 / result.attempted as f64,
        rule: match args.rule {
            RuleArg::Qm => "qm".into(),
            RuleArg::PerfectMatch => "perfect-match".into(),
        },
        target: args.state.label().to_string(),
    };
    let summary_path = sibling(&args.out, "summary");
    write_json_file(&summary, &summary_path)?;
    let manifest = RunManifest::new(
        args.seed,
        result.retained.meta().config_digest.clone(),
        &[&args.out, &summary_path],
        started,
    );
    write_json_file(&manifest, &sibling(&args.out, "manifest"))?;
    println!(
        "retained {} of {} tuples ({:.4}) -> {}",
        summary.retained,
        summary.attempted,
        summary.retention_rate,
        args.out.display()
    );
    Ok(())
}

fn hoppers(args: HoppersArgs) -> Result<()> {
    let started = Instant::now();
    require_positive("--shots", args.shots)?;
    let angles = args.angles.unwrap_or_default();
    let result = charlie_hoppers(args.shots, args.seed, &angles)?;
    let pooled = result.pooled();
    write_ensemble_file(&pooled, args.format.format(), &args.out)?;
    let mut outputs: Vec<PathBuf> = vec![args.out.clone()];
    for (i, hopper) in result.hoppers.iter().enumerate() {
        let path = hopper_path(&args.out, i);
        write_ensemble_file(hopper, args.format.format(), &path)?;
        outputs.push(path);
    }
    let mut counts = BTreeMap::new();
    let mut occupancy = BTreeMap::new();
    for (i, hopper) in result.hoppers.iter().enumerate() {
        counts.insert(format!("C{i}"), hopper.len() as u64);
        occupancy.insert(
            format!("C{i}"),
            hopper.len() as f64 / result.attempted as f64,
        );
    }
    let summary = HopperSummary {
        attempted: result.attempted,
        counts,
        occupancy,
    };
    let summary_path = sibling(&args.out, "summary");
    write_json_file(&summary, &summary_path)?;
    outputs.push(summary_path);
    let output_refs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
    let manifest = RunManifest::new(
        args.seed,
        result.hoppers[0].meta().config_digest.clone(),
        &output_refs,
        started,
    );
    write_json_file(&manifest, &sibling(&args.out, "manifest"))?;
    println!(
        "sorted {} tuples into hoppers {:?} -> {}",
        result.attempted,
        result.hoppers.iter().map(|h| h.len()).collect::<Vec<_>>(),
        args.out.display()
    );
    Ok(())
}
