//! Shared flag types and parsers.

use anyhow::{bail, Result};
use clap::ValueEnum;

use bellsel_core::ensemble::EnsembleFormat;
use bellsel_core::experiments::StatePolicy;
use bellsel_core::quantum::{AngleConfig, BellLabel};
use bellsel_core::toy::RetentionRule;

/// `--state` for vrun: a fixed Bell state or a uniform random draw per run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StateArg {
    C0,
    C1,
    C2,
    C3,
    Random,
}

impl StateArg {
    pub fn policy(self) -> StatePolicy {
        match self {
            StateArg::C0 => StatePolicy::Fixed(BellLabel::C0),
            StateArg::C1 => StatePolicy::Fixed(BellLabel::C1),
            StateArg::C2 => StatePolicy::Fixed(BellLabel::C2),
            StateArg::C3 => StatePolicy::Fixed(BellLabel::C3),
            StateArg::Random => StatePolicy::RandomUniform,
        }
    }
}

/// `--state` where only a fixed Bell state makes sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FixedStateArg {
    C0,
    C1,
    C2,
    C3,
}

impl FixedStateArg {
    pub fn label(self) -> BellLabel {
        match self {
            FixedStateArg::C0 => BellLabel::C0,
            FixedStateArg::C1 => BellLabel::C1,
            FixedStateArg::C2 => BellLabel::C2,
            FixedStateArg::C3 => BellLabel::C3,
        }
    }
}

/// `--format` for ensemble files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FileFormatArg {
    Jsonl,
    Csv,
}

impl FileFormatArg {
    pub fn format(self) -> EnsembleFormat {
        match self {
            FileFormatArg::Jsonl => EnsembleFormat::Jsonl,
            FileFormatArg::Csv => EnsembleFormat::Csv,
        }
    }
}

/// `--format` for reports printed to stdout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormatArg {
    Json,
    Table,
}

/// `--rule` for the retention toy model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Qm,
    PerfectMatch,
}

impl RuleArg {
    pub fn rule(self) -> RetentionRule {
        match self {
            RuleArg::Qm => RetentionRule::Qm,
            RuleArg::PerfectMatch => RetentionRule::PerfectMatch,
        }
    }
}

/// Parse `--angles a0,a1,b0,b1` (radians).
pub fn parse_angles(raw: &str) -> Result<AngleConfig> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 4 {
        bail!("--angles expects four comma-separated values a0,a1,b0,b1, got {raw:?}");
    }
    let mut vals = [0.0f64; 4];
    for (slot, part) in vals.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("--angles: {part:?} is not a number"))?;
    }
    AngleConfig::new(vals[0], vals[1], vals[2], vals[3])
        .map_err(|e| anyhow::anyhow!("--angles: {e}"))
}

/// Parse `--mixture uniform` or `--mixture w0,w1,w2,w3`.
pub fn parse_mixture(raw: &str) -> Result<[f64; 4]> {
    if raw.trim() == "uniform" {
        return Ok([0.25; 4]);
    }
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 4 {
        bail!("--mixture expects `uniform` or four comma-separated weights, got {raw:?}");
    }
    let mut w = [0.0f64; 4];
    for (slot, part) in w.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("--mixture: {part:?} is not a number"))?;
    }
    Ok(w)
}

/// Validate `--shots` / `--n` style counters at the CLI boundary so the
/// error names the flag.
pub fn require_positive(flag: &str, value: u64) -> Result<()> {
    if value == 0 {
        bail!("{flag} must be at least 1");
    }
    Ok(())
}

/// Validate a probability-valued flag.
pub fn require_probability(flag: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) || value.is_nan() {
        bail!("{flag} must lie in [0, 1], got {value}");
    }
    Ok(())
}
