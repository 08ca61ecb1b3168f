//! Non-quantum demonstrations of selection effects: collider conditioning,
//! the digit-parity restriction, and the range-restriction (common-cause)
//! example. All three report the phi coefficient (Pearson correlation of two
//! binary indicators) over the full population and a restricted one.

use std::path::Path;

use rand::Rng;
use serde::Serialize;

use crate::ensemble::{config_digest, Ensemble, EnsembleMeta, Geometry, RunRecord, SelLabel};
use crate::error::{Error, Result};
use crate::quantum::AngleConfig;
use crate::rng::StreamFactory;

/// Kind of fork a demo exhibits: fixing a correlating fork's vertex induces
/// correlations between its arms; fixing a decorrelating fork's vertex
/// removes them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ForkKind {
    Correlating,
    Decorrelating,
}

/// Correlation report over a population of binary pairs and a restricted
/// subset. Cell order is (X,Y) = (0,0), (0,1), (1,0), (1,1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForkReport {
    pub fork_kind: ForkKind,
    pub restriction_label: String,
    pub population_count: u64,
    pub restricted_count: u64,
    /// Phi coefficient over the full population; `None` when degenerate.
    pub population_corr: Option<f64>,
    /// Phi coefficient within the restriction; `None` when degenerate.
    pub restricted_corr: Option<f64>,
    pub population_cells: [u64; 4],
    pub restricted_cells: [u64; 4],
}

impl ForkReport {
    pub fn to_table(&self) -> String {
        let fmt_corr = |c: Option<f64>| match c {
            Some(v) => format!("{v:+.6}"),
            None => "undefined".to_string(),
        };
        let mut out = String::new();
        out.push_str(&format!(
            "fork report ({})\n",
            match self.fork_kind {
                ForkKind::Correlating => "correlating",
                ForkKind::Decorrelating => "decorrelating",
            }
        ));
        out.push_str(&format!(
            "  population: n = {}, corr = {}, cells = {:?}\n",
            self.population_count,
            fmt_corr(self.population_corr),
            self.population_cells
        ));
        out.push_str(&format!(
            "  restricted to {}: n = {}, corr = {}, cells = {:?}\n",
            self.restriction_label,
            self.restricted_count,
            fmt_corr(self.restricted_corr),
            self.restricted_cells
        ));
        out
    }
}

/// Phi coefficient from 2x2 cell counts; `None` when a marginal is
/// degenerate. Uses the determinant form so that deterministic tables give
/// exact +/-1.
pub fn phi_coefficient(cells: &[u64; 4]) -> Option<f64> {
    let [c00, c01, c10, c11] = cells.map(|c| c as f64);
    let x1 = c10 + c11;
    let x0 = c00 + c01;
    let y1 = c01 + c11;
    let y0 = c00 + c10;
    let denom = ((x1 * x0) * (y1 * y0)).sqrt();
    if denom == 0.0 {
        return None;
    }
    Some((c11 * c00 - c10 * c01) / denom)
}

fn cell_of(x: bool, y: bool) -> usize {
    (x as usize) * 2 + y as usize
}

/// Collider demonstration: G and H are independent fair bits and F = G xor H.
/// Conditioning on F = 0 forces G = H.
pub fn collider_demo(n: u64, seed: u64) -> Result<ForkReport> {
    collider_demo_conditioned(n, seed, 0)
}

/// Collider demonstration conditioned on an explicit value of F.
pub fn collider_demo_conditioned(n: u64, seed: u64, f_value: u8) -> Result<ForkReport> {
    if n < 2 {
        return Err(Error::InvalidArgument("n must be at least 2".into()));
    }
    if f_value > 1 {
        return Err(Error::InvalidArgument(format!(
            "F must be 0 or 1, got {f_value}"
        )));
    }
    let factory = StreamFactory::new(seed);
    let mut population = [0u64; 4];
    let mut restricted = [0u64; 4];
    for i in 0..n {
        let mut rng = factory.stream(i);
        let g = rng.gen::<bool>();
        let h = rng.gen::<bool>();
        let f = (g ^ h) as u8;
        population[cell_of(g, h)] += 1;
        if f == f_value {
            restricted[cell_of(g, h)] += 1;
        }
    }
    Ok(ForkReport {
        fork_kind: ForkKind::Correlating,
        restriction_label: format!("F={f_value}"),
        population_count: n,
        restricted_count: restricted.iter().sum(),
        population_corr: phi_coefficient(&population),
        restricted_corr: phi_coefficient(&restricted),
        population_cells: population,
        restricted_cells: restricted,
    })
}

/// A sequence of decimal digits with a source label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DigitSeq {
    digits: Vec<u8>,
    source: String,
}

impl DigitSeq {
    pub fn new(digits: Vec<u8>, source: impl Into<String>) -> Result<Self> {
        if digits.iter().any(|d| *d > 9) {
            return Err(Error::InvalidArgument(
                "digits must lie in 0..=9".into(),
            ));
        }
        Ok(DigitSeq {
            digits,
            source: source.into(),
        })
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }
}

/// Load the first `count` fractional digits from a plain-text digit file.
/// Non-digit characters (whitespace, line breaks) are ignored.
pub fn load_digits(path: &Path, count: usize) -> Result<DigitSeq> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let text = std::fs::read_to_string(path)?;
    let digits: Vec<u8> = text
        .bytes()
        .filter(|b| b.is_ascii_digit())
        .map(|b| b - b'0')
        .take(count)
        .collect();
    if digits.len() < count {
        // Re-scan for the true total so the error is informative.
        let available = text.bytes().filter(|b| b.is_ascii_digit()).count();
        return Err(Error::InsufficientDigits {
            required: count,
            available,
        });
    }
    let source = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("digits")
        .to_string();
    DigitSeq::new(digits, source)
}

/// Two independent synthetic digit sequences with i.i.d. uniform digits.
pub fn synthetic_digit_pair(count: usize, seed: u64) -> Result<(DigitSeq, DigitSeq)> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let factory = StreamFactory::new(seed);
    let make = |stream: u64, label: &str| {
        let mut rng = factory.stream(stream);
        let digits: Vec<u8> = (0..count).map(|_| rng.gen_range(0..10u8)).collect();
        DigitSeq::new(digits, label)
    };
    Ok((make(0, "synthetic-a")?, make(1, "synthetic-b")?))
}

/// Digit-parity correlator: X_n and Y_n are the parities of the two digit
/// streams; the restriction keeps positions where the digits are not both
/// odd. Within that set the odd-odd cell is empty by construction and the
/// parities anticorrelate.
pub fn parity_correlator(s1: &DigitSeq, s2: &DigitSeq) -> Result<ForkReport> {
    if s1.len() != s2.len() {
        return Err(Error::LengthMismatch {
            left: s1.len(),
            right: s2.len(),
        });
    }
    if s1.is_empty() {
        return Err(Error::InvalidArgument(
            "digit sequences must be non-empty".into(),
        ));
    }
    let mut population = [0u64; 4];
    let mut restricted = [0u64; 4];
    for (d1, d2) in s1.digits().iter().zip(s2.digits()) {
        let x = d1 % 2 == 1;
        let y = d2 % 2 == 1;
        population[cell_of(x, y)] += 1;
        if !(x && y) {
            restricted[cell_of(x, y)] += 1;
        }
    }
    Ok(ForkReport {
        fork_kind: ForkKind::Correlating,
        restriction_label: "not-both-odd".into(),
        population_count: s1.len() as u64,
        restricted_count: restricted.iter().sum(),
        population_corr: phi_coefficient(&population),
        restricted_corr: phi_coefficient(&restricted),
        population_cells: population,
        restricted_cells: restricted,
    })
}

/// Repackage a parity comparison as a labeled ensemble so the selection-bias
/// tests in [`crate::analysis`] can run on it directly: settings are fixed at
/// (0,0), outcomes are the two parities, and the selection label marks
/// membership of the not-both-odd restriction (C0 inside, C1 outside). Not
/// part of any default pipeline.
pub fn parity_selection_ensemble(s1: &DigitSeq, s2: &DigitSeq) -> Result<Ensemble> {
    if s1.len() != s2.len() {
        return Err(Error::LengthMismatch {
            left: s1.len(),
            right: s2.len(),
        });
    }
    if s1.is_empty() {
        return Err(Error::InvalidArgument(
            "digit sequences must be non-empty".into(),
        ));
    }
    let records: Vec<RunRecord> = s1
        .digits()
        .iter()
        .zip(s2.digits())
        .enumerate()
        .map(|(n, (d1, d2))| {
            let x = d1 % 2;
            let y = d2 % 2;
            let inside = !(x == 1 && y == 1);
            RunRecord {
                run: n as u64,
                a: 0,
                b: 0,
                outcome_a: x,
                outcome_b: y,
                sel: Some(if inside { SelLabel::C0 } else { SelLabel::C1 }),
                geometry: Geometry::V,
            }
        })
        .collect();
    let digest = config_digest(&(
        "parity_selection",
        s1.source(),
        s2.source(),
        s1.len(),
    ));
    let angles = AngleConfig::new(0.0, 0.0, 0.0, 0.0).expect("zero angles are finite");
    Ensemble::from_parts(
        EnsembleMeta {
            seed: 0,
            config_digest: digest,
            shots: records.len() as u64,
            attempted: None,
            angles,
        },
        records,
    )
}

fn require_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "{name} must be a probability in [0, 1], got {p}"
        )));
    }
    Ok(())
}

/// Range-restriction demonstration: two rare conditions K and L occur only
/// in white subjects, independently given the color. The full population
/// shows a correlation; restricting to white subjects masks it.
pub fn mice_demo(n: u64, seed: u64, p_white: f64, p_k: f64, p_l: f64) -> Result<ForkReport> {
    if n < 2 {
        return Err(Error::InvalidArgument("n must be at least 2".into()));
    }
    require_probability("p_white", p_white)?;
    require_probability("p_k", p_k)?;
    require_probability("p_l", p_l)?;
    let factory = StreamFactory::new(seed);
    let mut population = [0u64; 4];
    let mut restricted = [0u64; 4];
    for i in 0..n {
        let mut rng = factory.stream(i);
        let white = rng.gen::<f64>() < p_white;
        let (k, l) = if white {
            (rng.gen::<f64>() < p_k, rng.gen::<f64>() < p_l)
        } else {
            (false, false)
        };
        population[cell_of(k, l)] += 1;
        if white {
            restricted[cell_of(k, l)] += 1;
        }
    }
    Ok(ForkReport {
        fork_kind: ForkKind::Decorrelating,
        restriction_label: "white".into(),
        population_count: n,
        restricted_count: restricted.iter().sum(),
        population_corr: phi_coefficient(&population),
        restricted_corr: phi_coefficient(&restricted),
        population_cells: population,
        restricted_cells: restricted,
    })
}
