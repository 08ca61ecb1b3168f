//! `vrun` and `wrun`: ensemble generation with file + manifest emission.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Result;
use clap::Args;

use bellsel_core::ensemble::Ensemble;
use bellsel_core::experiments::{run_v, run_w, VConfig};
use bellsel_core::quantum::AngleConfig;

use crate::args::{parse_angles, require_positive, FileFormatArg, StateArg};
use crate::output::{sibling, write_ensemble_file, write_json_file, RunManifest};

#[derive(Debug, Args)]
pub struct VrunArgs {
    /// Initial Bell state per run: c0..c3 fixed, or a uniform random draw
    #[arg(long, value_enum, default_value_t = StateArg::Random)]
    pub state: StateArg,
    /// Number of runs to generate
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
    /// Output path for the ensemble
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct WrunArgs {
    /// Number of runs to generate
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
    /// Output path for the ensemble
    #[arg(long)]
    pub out: PathBuf,
}

fn emit(ensemble: &Ensemble, format: FileFormatArg, out: &Path, started: Instant) -> Result<()> {
    write_ensemble_file(ensemble, format.format(), out)?;
    let manifest = RunManifest::new(
        ensemble.meta().seed,
        ensemble.meta().config_digest.clone(),
        &[out],
        started,
    );
    write_json_file(&manifest, &sibling(out, "manifest"))?;
    println!("wrote {} records to {}", ensemble.len(), out.display());
    let total = ensemble.len() as f64;
    let counts: Vec<String> = ensemble
        .sel_counts()
        .iter()
        .map(|(sel, n)| format!("{sel}={n} ({:.4})", *n as f64 / total))
        .collect();
    if !counts.is_empty() {
        println!("sel counts: {}", counts.join(" "));
    }
    Ok(())
}

pub fn vrun(args: VrunArgs) -> Result<()> {
    let started = Instant::now();
    require_positive("--shots", args.shots)?;
    let config = VConfig {
        state_policy: args.state.policy(),
        angles: args.angles.unwrap_or_default(),
    };
    let ensemble = run_v(&config, args.shots, args.seed)?;
    emit(&ensemble, args.format, &args.out, started)
}

pub fn wrun(args: WrunArgs) -> Result<()> {
    let started = Instant::now();
    require_positive("--shots", args.shots)?;
    let angles = args.angles.unwrap_or_default();
    let ensemble = run_w(&angles, args.shots, args.seed)?;
    emit(&ensemble, args.format, &args.out, started)
}
