//! `exact`: closed-form distributions, correlators, and CHSH without
//! sampling — the oracle path against which Monte Carlo runs are checked.

use anyhow::{bail, Result};
use clap::Args;
use serde::Serialize;

use bellsel_core::quantum::{
    bell_state, joint_probabilities, mixed_joint_probabilities, setting_pairs, AngleConfig,
    ChshVariant, JointDist,
};

use crate::args::{parse_angles, parse_mixture, FixedStateArg, ReportFormatArg};

#[derive(Debug, Args)]
pub struct ExactArgs {
    /// Bell state to evaluate
    #[arg(long, value_enum, conflicts_with = "mixture")]
    pub state: Option<FixedStateArg>,
    /// Convex Bell-state mixture: `uniform` or four weights w0,w1,w2,w3
    #[arg(long, value_parser = parse_mixture)]
    pub mixture: Option<[f64; 4]>,
    /// Analyzer angles a0,a1,b0,b1 in radians [default: 0,pi/4,pi/8,3pi/8]
    #[arg(long, value_parser = parse_angles)]
    pub angles: Option<AngleConfig>,
    /// Output format
    #[arg(long, value_enum, default_value_t = ReportFormatArg::Table)]
    pub format: ReportFormatArg,
}

#[derive(Serialize)]
struct ExactPair {
    a: u8,
    b: u8,
    alpha: f64,
    beta: f64,
    /// Cell probabilities in the order (0,0), (0,1), (1,0), (1,1).
    cells: [f64; 4],
    e: f64,
}

#[derive(Serialize)]
struct ExactReport {
    state: Option<String>,
    mixture: Option<[f64; 4]>,
    angles: AngleConfig,
    pairs: Vec<ExactPair>,
    /// CHSH under the canonical sign placement.
    s: f64,
    variant: ChshVariant,
    /// CHSH maximized over the four sign placements.
    s_best: f64,
    best_variant: ChshVariant,
}

impl ExactReport {
    fn to_table(&self) -> String {
        let mut out = String::new();
        let source = match (&self.state, &self.mixture) {
            (Some(s), _) => format!("state {s}"),
            (None, Some(w)) => format!("mixture {w:?}"),
            _ => "?".into(),
        };
        out.push_str(&format!("exact Born-rule distributions ({source})\n"));
        out.push_str("  a b    alpha     beta      p00      p01      p10      p11         E\n");
        for p in &self.pairs {
            out.push_str(&format!(
                "  {} {} {:+.5} {:+.5}  {:.5}  {:.5}  {:.5}  {:.5}  {:+.6}\n",
                p.a, p.b, p.alpha, p.beta, p.cells[0], p.cells[1], p.cells[2], p.cells[3], p.e
            ));
        }
        out.push_str(&format!(
            "CHSH S = {:+.9} ({}), |S| = {:.9}\n",
            self.s,
            self.variant,
            self.s.abs()
        ));
        if self.best_variant != self.variant {
            out.push_str(&format!(
                "best placement: S = {:+.9} ({})\n",
                self.s_best, self.best_variant
            ));
        }
        out
    }
}

pub fn run(args: ExactArgs) -> Result<()> {
    let angles = args.angles.unwrap_or_default();
    let dist_at = |a: u8, b: u8| -> Result<JointDist> {
        let (alpha, beta) = (angles.alice(a), angles.bob(b));
        let dist = match (&args.state, &args.mixture) {
            (Some(state), None) => joint_probabilities(&bell_state(state.label()), alpha, beta)?,
            (None, Some(weights)) => mixed_joint_probabilities(weights, alpha, beta)
                .map_err(|e| anyhow::anyhow!("--mixture: {e}"))?,
            (None, None) => bail!("pass either --state or --mixture"),
            (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
        };
        Ok(dist)
    };

    let mut pairs = Vec::new();
    let mut correlators = [0.0f64; 4];
    for (i, (a, b)) in setting_pairs().into_iter().enumerate() {
        let dist = dist_at(a, b)?;
        let e = dist.correlator();
        correlators[i] = e;
        pairs.push(ExactPair {
            a,
            b,
            alpha: angles.alice(a),
            beta: angles.bob(b),
            cells: dist.cells(),
            e,
        });
    }

    let chsh = |variant: ChshVariant| -> f64 {
        variant
            .signs()
            .iter()
            .zip(correlators)
            .map(|(sign, e)| sign * e)
            .sum()
    };
    let canonical = ChshVariant::canonical();
    let s = chsh(canonical);
    let (best_variant, s_best) = ChshVariant::ALL
        .into_iter()
        .map(|v| (v, chsh(v)))
        .max_by(|(_, x), (_, y)| x.abs().total_cmp(&y.abs()))
        .expect("four variants");

    let report = ExactReport {
        state: args.state.map(|s| s.label().to_string()),
        mixture: args.mixture,
        angles,
        pairs,
        s,
        variant: canonical,
        s_best,
        best_variant,
    };
    match args.format {
        ReportFormatArg::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        ReportFormatArg::Table => print!("{}", report.to_table()),
    }
    Ok(())
}
