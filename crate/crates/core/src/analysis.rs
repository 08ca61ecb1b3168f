//! Statistical test battery over ensembles: correlation and CHSH estimation,
//! the minimal selection-bias test, no-signalling checks, and factorizability
//! checks.
//!
//! All estimators run on plain outcome counts; zero-count cells surface as
//! explicit `None`/status values rather than NaN arithmetic.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::ensemble::{Ensemble, SelLabel};
use crate::error::{Error, Result};
use crate::quantum::{cell_index, setting_pairs, ChshVariant};

/// Saturation value for a standardized score whose variance estimate is
/// exactly zero but whose difference is not.
const SATURATED_Z: f64 = 1e15;

/// How to split an ensemble before estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    None,
    Selection,
}

/// Outcome counts per setting pair; pair index a*2+b, cell index A*2+B.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JointCounts {
    cells: [[u64; 4]; 4],
}

impl JointCounts {
    pub fn add(&mut self, a: u8, b: u8, outcome_a: u8, outcome_b: u8) {
        self.cells[(a * 2 + b) as usize][cell_index(outcome_a, outcome_b)] += 1;
    }

    pub fn merge(&mut self, other: &JointCounts) {
        for (mine, theirs) in self.cells.iter_mut().zip(other.cells.iter()) {
            for (m, t) in mine.iter_mut().zip(theirs) {
                *m += t;
            }
        }
    }

    pub fn pair_cells(&self, a: u8, b: u8) -> [u64; 4] {
        self.cells[(a * 2 + b) as usize]
    }

    pub fn pair_total(&self, a: u8, b: u8) -> u64 {
        self.pair_cells(a, b).iter().sum()
    }

    /// (E, standard error) for one setting pair; `None` when unpopulated.
    pub fn correlator(&self, a: u8, b: u8) -> Option<(f64, f64)> {
        let cells = self.pair_cells(a, b);
        let n: u64 = cells.iter().sum();
        if n == 0 {
            return None;
        }
        let nf = n as f64;
        let e = (cells[0] as f64 + cells[3] as f64 - cells[1] as f64 - cells[2] as f64) / nf;
        let se = ((1.0 - e * e).max(0.0) / nf).sqrt();
        Some((e, se))
    }

    /// Empirical cell frequencies for one setting pair.
    pub fn pair_frequencies(&self, a: u8, b: u8) -> Option<[f64; 4]> {
        let cells = self.pair_cells(a, b);
        let n: u64 = cells.iter().sum();
        if n == 0 {
            return None;
        }
        Some(cells.map(|c| c as f64 / n as f64))
    }
}

/// Count table per group. With [`GroupBy::None`] there is a single unlabeled
/// group; with [`GroupBy::Selection`] every record must carry a label.
fn grouped_counts(
    ensemble: &Ensemble,
    group_by: GroupBy,
) -> Result<Vec<(Option<SelLabel>, JointCounts)>> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    match group_by {
        GroupBy::None => {
            let mut counts = JointCounts::default();
            for rec in ensemble.records() {
                counts.add(rec.a, rec.b, rec.outcome_a, rec.outcome_b);
            }
            Ok(vec![(None, counts)])
        }
        GroupBy::Selection => {
            let mut groups: BTreeMap<SelLabel, JointCounts> = BTreeMap::new();
            for rec in ensemble.records() {
                let sel = rec.sel.ok_or(Error::MissingSelection { run: rec.run })?;
                groups
                    .entry(sel)
                    .or_default()
                    .add(rec.a, rec.b, rec.outcome_a, rec.outcome_b);
            }
            if groups.is_empty() {
                return Err(Error::NoSelectionLabels);
            }
            Ok(groups.into_iter().map(|(k, v)| (Some(k), v)).collect())
        }
    }
}

/// A setting pair (a, b).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SettingPair {
    pub a: u8,
    pub b: u8,
}

/// Correlator estimate for one setting pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairCorrelation {
    pub a: u8,
    pub b: u8,
    pub count: u64,
    /// Empirical E = (N_same - N_diff) / N; absent when the pair is
    /// unpopulated.
    pub e: Option<f64>,
    /// sqrt((1 - E^2) / N); absent with `e`.
    pub std_error: Option<f64>,
}

/// Correlator estimates for all four setting pairs within one group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    /// Selection label of the group, or `None` for the whole ensemble.
    pub group: Option<SelLabel>,
    pub pairs: Vec<PairCorrelation>,
}

impl CorrelationReport {
    fn from_counts(group: Option<SelLabel>, counts: &JointCounts) -> CorrelationReport {
        let pairs = setting_pairs()
            .into_iter()
            .map(|(a, b)| {
                let stats = counts.correlator(a, b);
                PairCorrelation {
                    a,
                    b,
                    count: counts.pair_total(a, b),
                    e: stats.map(|(e, _)| e),
                    std_error: stats.map(|(_, se)| se),
                }
            })
            .collect();
        CorrelationReport { group, pairs }
    }

    pub fn pair(&self, a: u8, b: u8) -> &PairCorrelation {
        &self.pairs[(a * 2 + b) as usize]
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let head = match self.group {
            Some(sel) => format!("group {sel}"),
            None => "all records".to_string(),
        };
        out.push_str(&format!("correlations ({head})\n"));
        out.push_str("  a b    count         E        SE\n");
        for p in &self.pairs {
            match (p.e, p.std_error) {
                (Some(e), Some(se)) => out.push_str(&format!(
                    "  {} {} {:>8}  {:+.6}  {:.6}\n",
                    p.a, p.b, p.count, e, se
                )),
                _ => out.push_str(&format!("  {} {} {:>8} undefined\n", p.a, p.b, p.count)),
            }
        }
        out
    }
}

/// Empirical correlators per setting pair, optionally grouped by selection
/// label. Unpopulated pairs are reported as undefined, never imputed.
pub fn estimate_correlations(
    ensemble: &Ensemble,
    group_by: GroupBy,
) -> Result<Vec<CorrelationReport>> {
    Ok(grouped_counts(ensemble, group_by)?
        .into_iter()
        .map(|(group, counts)| CorrelationReport::from_counts(group, &counts))
        .collect())
}

/// Status of a CHSH estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateStatus {
    Ok,
    Unavailable,
}

/// CHSH estimate with propagated standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChshEstimate {
    pub group: Option<SelLabel>,
    pub status: EstimateStatus,
    /// Sign placement used for the sum.
    pub variant: ChshVariant,
    pub s: Option<f64>,
    /// Quadrature sum of the four per-pair standard errors.
    pub std_error: Option<f64>,
    /// True when |S| - 2 > z * std_error.
    pub violates_classical: Option<bool>,
    pub z: f64,
    /// Setting pairs with no data, present when status is `unavailable`.
    pub missing_pairs: Vec<SettingPair>,
}

impl ChshEstimate {
    pub fn to_table(&self) -> String {
        let head = match self.group {
            Some(sel) => format!("group {sel}"),
            None => "all records".to_string(),
        };
        match (self.s, self.std_error, self.violates_classical) {
            (Some(s), Some(se), Some(v)) => format!(
                "CHSH ({head}): S = {s:+.6} +/- {se:.6} [{}], |S| > 2 at z={}: {}\n",
                self.variant,
                self.z,
                if v { "yes" } else { "no" }
            ),
            _ => {
                let missing: Vec<String> = self
                    .missing_pairs
                    .iter()
                    .map(|p| format!("({},{})", p.a, p.b))
                    .collect();
                format!(
                    "CHSH ({head}): unavailable, unpopulated pairs: {}\n",
                    missing.join(" ")
                )
            }
        }
    }
}

fn chsh_from_report(report: &CorrelationReport, variant: ChshVariant, z: f64) -> ChshEstimate {
    let missing: Vec<SettingPair> = report
        .pairs
        .iter()
        .filter(|p| p.e.is_none())
        .map(|p| SettingPair { a: p.a, b: p.b })
        .collect();
    if !missing.is_empty() {
        return ChshEstimate {
            group: report.group,
            status: EstimateStatus::Unavailable,
            variant,
            s: None,
            std_error: None,
            violates_classical: None,
            z,
            missing_pairs: missing,
        };
    }
    let signs = variant.signs();
    let mut s = 0.0;
    let mut var = 0.0;
    for (i, p) in report.pairs.iter().enumerate() {
        s += signs[i] * p.e.expect("populated");
        let se = p.std_error.expect("populated");
        var += se * se;
    }
    let se = var.sqrt();
    let violates = (s.abs() - 2.0) > z * se;
    ChshEstimate {
        group: report.group,
        status: EstimateStatus::Ok,
        variant,
        s: Some(s),
        std_error: Some(se),
        violates_classical: Some(violates),
        z,
        missing_pairs: Vec::new(),
    }
}

/// CHSH estimate under the canonical sign placement.
pub fn estimate_chsh(report: &CorrelationReport, z: f64) -> ChshEstimate {
    chsh_from_report(report, ChshVariant::canonical(), z)
}

/// CHSH estimate under an explicit sign placement.
pub fn estimate_chsh_variant(
    report: &CorrelationReport,
    variant: ChshVariant,
    z: f64,
) -> ChshEstimate {
    chsh_from_report(report, variant, z)
}

/// CHSH estimate maximized over the four sign placements. Every placement is
/// bounded by 2 for factorizable models, so a violation under the best
/// placement certifies nonclassical correlations regardless of which Bell
/// state produced the group.
pub fn estimate_chsh_best(report: &CorrelationReport, z: f64) -> ChshEstimate {
    let mut best: Option<ChshEstimate> = None;
    for variant in ChshVariant::ALL {
        let est = chsh_from_report(report, variant, z);
        let better = match (&best, &est.s) {
            (None, _) => true,
            (Some(b), Some(s)) => s.abs() > b.s.map(f64::abs).unwrap_or(f64::NEG_INFINITY),
            (Some(_), None) => false,
        };
        if better {
            best = Some(est);
        }
    }
    best.expect("four variants evaluated")
}

/// Grouped CHSH estimates (best sign placement per group).
pub fn estimate_chsh_grouped(
    ensemble: &Ensemble,
    group_by: GroupBy,
    z: f64,
) -> Result<Vec<ChshEstimate>> {
    Ok(estimate_correlations(ensemble, group_by)?
        .iter()
        .map(|r| estimate_chsh_best(r, z))
        .collect())
}

/// Direction of a flagged discrepancy: selection that produces correlations
/// versus selection that hides them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasDirection {
    Inducing,
    Masking,
}

/// One (subensemble, setting pair) comparison against the super-ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MsbcDiscrepancy {
    pub sel: SelLabel,
    pub a: u8,
    pub b: u8,
    pub e_sub: f64,
    pub e_super: f64,
    pub difference: f64,
    /// |difference| / sqrt(se_sub^2 + se_super^2).
    pub z_score: f64,
    pub direction: BiasDirection,
    pub significant: bool,
}

/// Result of the minimal selection-bias test: does any correlation differ
/// between the super-ensemble and a selected subensemble?
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MsbcReport {
    pub z: f64,
    pub msbc_holds: bool,
    /// Largest standardized discrepancy across (pair, sel).
    pub max_discrepancy: Option<f64>,
    pub super_report: CorrelationReport,
    pub sub_reports: Vec<CorrelationReport>,
    pub discrepancies: Vec<MsbcDiscrepancy>,
}

impl MsbcReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "MSBC test (z = {}): selection bias {}\n",
            self.z,
            if self.msbc_holds { "DETECTED" } else { "not detected" }
        ));
        if let Some(m) = self.max_discrepancy {
            out.push_str(&format!("max standardized discrepancy: {m:.3}\n"));
        }
        out.push_str(&self.super_report.to_table());
        for sub in &self.sub_reports {
            out.push_str(&sub.to_table());
        }
        let flagged: Vec<&MsbcDiscrepancy> =
            self.discrepancies.iter().filter(|d| d.significant).collect();
        if flagged.is_empty() {
            out.push_str("no significant discrepancies\n");
        } else {
            out.push_str("flagged discrepancies:\n");
            out.push_str("  sel a b     E_sub   E_super         z direction\n");
            for d in flagged {
                out.push_str(&format!(
                    "  {} {} {}  {:+.4}   {:+.4}  {:>8.2} {}\n",
                    d.sel,
                    d.a,
                    d.b,
                    d.e_sub,
                    d.e_super,
                    d.z_score,
                    match d.direction {
                        BiasDirection::Inducing => "inducing",
                        BiasDirection::Masking => "masking",
                    }
                ));
            }
        }
        out
    }
}

/// The minimal selection-bias test. Requires a selection label on every
/// record. A discrepancy is significant when |E_sub - E_super| exceeds z
/// times the quadrature-combined standard error.
pub fn msbc_test(ensemble: &Ensemble, z: f64) -> Result<MsbcReport> {
    let super_counts = grouped_counts(ensemble, GroupBy::None)?
        .pop()
        .expect("single unlabeled group")
        .1;
    let groups = grouped_counts(ensemble, GroupBy::Selection)?;
    let super_report = CorrelationReport::from_counts(None, &super_counts);
    let mut sub_reports = Vec::new();
    let mut discrepancies = Vec::new();
    for (sel, counts) in &groups {
        let sel = sel.expect("selection grouping always labels groups");
        let report = CorrelationReport::from_counts(Some(sel), counts);
        for (a, b) in setting_pairs() {
            let (sub, sup) = (report.pair(a, b), super_report.pair(a, b));
            let (Some(e_sub), Some(se_sub)) = (sub.e, sub.std_error) else {
                continue;
            };
            let (Some(e_super), Some(se_super)) = (sup.e, sup.std_error) else {
                continue;
            };
            let difference = e_sub - e_super;
            let combined = (se_sub * se_sub + se_super * se_super).sqrt();
            let z_score = if combined > 0.0 {
                difference.abs() / combined
            } else if difference == 0.0 {
                0.0
            } else {
                SATURATED_Z
            };
            let direction = if e_sub.abs() > e_super.abs() {
                BiasDirection::Inducing
            } else {
                BiasDirection::Masking
            };
            discrepancies.push(MsbcDiscrepancy {
                sel,
                a,
                b,
                e_sub,
                e_super,
                difference,
                z_score,
                direction,
                significant: z_score > z,
            });
        }
        sub_reports.push(report);
    }
    let max_discrepancy = discrepancies
        .iter()
        .map(|d| d.z_score)
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |a| a.max(v)))
        });
    let msbc_holds = discrepancies.iter().any(|d| d.significant);
    Ok(MsbcReport {
        z,
        msbc_holds,
        max_discrepancy,
        super_report,
        sub_reports,
        discrepancies,
    })
}

/// Which wing of the experiment a marginal check concerns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    A,
    B,
}

/// Marginal-independence check for one (group, side, local setting).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginalCheck {
    pub group: Option<SelLabel>,
    pub side: Side,
    pub local_setting: u8,
    /// P(outcome = 0 | local setting, remote setting = 0).
    pub rate_remote0: Option<f64>,
    /// P(outcome = 0 | local setting, remote setting = 1).
    pub rate_remote1: Option<f64>,
    pub count_remote0: u64,
    pub count_remote1: u64,
    pub difference: Option<f64>,
    pub z_score: Option<f64>,
    pub pass: Option<bool>,
}

/// No-signalling report: marginals on each side must not depend on the
/// remote setting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoSignallingReport {
    pub z: f64,
    pub pass: bool,
    pub max_difference: Option<f64>,
    pub max_z: Option<f64>,
    pub checks: Vec<MarginalCheck>,
}

impl NoSignallingReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "no-signalling check (z = {}): {}\n",
            self.z,
            if self.pass { "PASS" } else { "FAIL" }
        ));
        out.push_str("  group side setting  P(.|r=0)  P(.|r=1)      diff        z\n");
        for c in &self.checks {
            let group = c.group.map(|s| s.to_string()).unwrap_or_else(|| "all".into());
            match (c.rate_remote0, c.rate_remote1, c.difference, c.z_score) {
                (Some(r0), Some(r1), Some(d), Some(zv)) => out.push_str(&format!(
                    "  {:>5} {:>4} {:>7}  {:.6}  {:.6}  {:.6} {:>8.2}\n",
                    group,
                    match c.side {
                        Side::A => "A",
                        Side::B => "B",
                    },
                    c.local_setting,
                    r0,
                    r1,
                    d,
                    zv
                )),
                _ => out.push_str(&format!(
                    "  {:>5} {:>4} {:>7}  insufficient data\n",
                    group,
                    match c.side {
                        Side::A => "A",
                        Side::B => "B",
                    },
                    c.local_setting
                )),
            }
        }
        out
    }
}

fn marginal_counts(counts: &JointCounts, side: Side, local: u8, remote: u8) -> (u64, u64) {
    // Returns (outcome-zero count, total) for the side's outcome with the
    // given local and remote settings.
    let (a, b) = match side {
        Side::A => (local, remote),
        Side::B => (remote, local),
    };
    let cells = counts.pair_cells(a, b);
    let total: u64 = cells.iter().sum();
    let zeros = match side {
        Side::A => cells[cell_index(0, 0)] + cells[cell_index(0, 1)],
        Side::B => cells[cell_index(0, 0)] + cells[cell_index(1, 0)],
    };
    (zeros, total)
}

/// Check that each side's outcome marginal is independent of the remote
/// setting, using a pooled two-proportion z-test per comparison.
pub fn no_signalling_check(
    ensemble: &Ensemble,
    group_by: GroupBy,
    z: f64,
) -> Result<NoSignallingReport> {
    let groups = grouped_counts(ensemble, group_by)?;
    let mut checks = Vec::new();
    for (group, counts) in &groups {
        for side in [Side::A, Side::B] {
            for local in 0..2u8 {
                let (x0, n0) = marginal_counts(counts, side, local, 0);
                let (x1, n1) = marginal_counts(counts, side, local, 1);
                let check = if n0 == 0 || n1 == 0 {
                    MarginalCheck {
                        group: *group,
                        side,
                        local_setting: local,
                        rate_remote0: None,
                        rate_remote1: None,
                        count_remote0: n0,
                        count_remote1: n1,
                        difference: None,
                        z_score: None,
                        pass: None,
                    }
                } else {
                    let p0 = x0 as f64 / n0 as f64;
                    let p1 = x1 as f64 / n1 as f64;
                    let diff = (p0 - p1).abs();
                    let pool = (x0 + x1) as f64 / (n0 + n1) as f64;
                    let var = pool * (1.0 - pool) * (1.0 / n0 as f64 + 1.0 / n1 as f64);
                    let z_score = if var > 0.0 {
                        diff / var.sqrt()
                    } else if diff == 0.0 {
                        0.0
                    } else {
                        SATURATED_Z
                    };
                    MarginalCheck {
                        group: *group,
                        side,
                        local_setting: local,
                        rate_remote0: Some(p0),
                        rate_remote1: Some(p1),
                        count_remote0: n0,
                        count_remote1: n1,
                        difference: Some(diff),
                        z_score: Some(z_score),
                        pass: Some(z_score <= z),
                    }
                };
                checks.push(check);
            }
        }
    }
    let pass = checks.iter().all(|c| c.pass.unwrap_or(true));
    let max_difference = checks
        .iter()
        .filter_map(|c| c.difference)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    let max_z = checks
        .iter()
        .filter_map(|c| c.z_score)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    Ok(NoSignallingReport {
        z,
        pass,
        max_difference,
        max_z,
        checks,
    })
}

/// Status of a factorizability entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Ok,
    InsufficientData,
}

/// Factorizability check for one (group, setting pair).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FactorizabilityPair {
    pub group: Option<SelLabel>,
    pub a: u8,
    pub b: u8,
    pub count: u64,
    /// Max over cells of |P(A,B) - P(A)P(B)|; in a 2x2 table this is the
    /// covariance magnitude, identical for every cell.
    pub max_gap: Option<f64>,
    pub z_score: Option<f64>,
    pub status: CheckStatus,
    pub pass: bool,
}

/// Factorizability report: joint frequencies must factor into the product
/// of marginals within sampling error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorizabilityReport {
    pub z: f64,
    pub pass: bool,
    pub pairs: Vec<FactorizabilityPair>,
}

impl FactorizabilityReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "factorizability check (z = {}): {}\n",
            self.z,
            if self.pass { "PASS" } else { "FAIL" }
        ));
        out.push_str("  group a b    count   max gap        z status\n");
        for p in &self.pairs {
            let group = p.group.map(|s| s.to_string()).unwrap_or_else(|| "all".into());
            match (p.max_gap, p.z_score) {
                (Some(g), Some(zv)) => out.push_str(&format!(
                    "  {:>5} {} {} {:>8}  {:.6} {:>8.2} {}\n",
                    group,
                    p.a,
                    p.b,
                    p.count,
                    g,
                    zv,
                    if p.pass { "pass" } else { "FAIL" }
                )),
                _ => out.push_str(&format!(
                    "  {:>5} {} {} {:>8}  insufficient data\n",
                    group, p.a, p.b, p.count
                )),
            }
        }
        out
    }
}

/// Check P(A,B|a,b) = P(A|a,b) P(B|a,b) per group and setting pair. Pairs
/// with fewer than two records or degenerate marginals are flagged
/// `insufficient_data` and pass trivially.
pub fn factorizability_check(
    ensemble: &Ensemble,
    group_by: GroupBy,
    z: f64,
) -> Result<FactorizabilityReport> {
    let groups = grouped_counts(ensemble, group_by)?;
    let mut pairs = Vec::new();
    for (group, counts) in &groups {
        for (a, b) in setting_pairs() {
            let n = counts.pair_total(a, b);
            let entry = match counts.pair_frequencies(a, b) {
                Some(freqs) if n >= 2 => {
                    let pa0 = freqs[0] + freqs[1];
                    let pb0 = freqs[0] + freqs[2];
                    let gap = (freqs[0] - pa0 * pb0).abs();
                    let var = pa0 * (1.0 - pa0) * pb0 * (1.0 - pb0) / n as f64;
                    if var > 0.0 {
                        let z_score = gap / var.sqrt();
                        FactorizabilityPair {
                            group: *group,
                            a,
                            b,
                            count: n,
                            max_gap: Some(gap),
                            z_score: Some(z_score),
                            status: CheckStatus::Ok,
                            pass: z_score <= z,
                        }
                    } else {
                        // Degenerate marginal forces a zero gap.
                        FactorizabilityPair {
                            group: *group,
                            a,
                            b,
                            count: n,
                            max_gap: Some(gap),
                            z_score: None,
                            status: CheckStatus::InsufficientData,
                            pass: true,
                        }
                    }
                }
                _ => FactorizabilityPair {
                    group: *group,
                    a,
                    b,
                    count: n,
                    max_gap: None,
                    z_score: None,
                    status: CheckStatus::InsufficientData,
                    pass: true,
                },
            };
            pairs.push(entry);
        }
    }
    let pass = pairs.iter().all(|p| p.pass);
    Ok(FactorizabilityReport { z, pass, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{EnsembleMeta, Geometry, RunRecord};
    use crate::experiments::{run_product_control, run_v, run_w, StatePolicy, VConfig};
    use crate::quantum::{bell_state, chsh_value, joint_probabilities, AngleConfig, BellLabel};

    fn build(records: Vec<RunRecord>) -> Ensemble {
        let meta = EnsembleMeta {
            seed: 0,
            config_digest: "test".into(),
            shots: records.len() as u64,
            attempted: None,
            angles: AngleConfig::default(),
        };
        Ensemble::from_parts(meta, records).unwrap()
    }

    fn rec(run: u64, a: u8, b: u8, oa: u8, ob: u8, sel: Option<SelLabel>) -> RunRecord {
        RunRecord {
            run,
            a,
            b,
            outcome_a: oa,
            outcome_b: ob,
            sel,
            geometry: Geometry::V,
        }
    }

    #[test]
    fn perfect_matches_give_unit_correlator() {
        let mut records = Vec::new();
        for i in 0..40u64 {
            let a = (i % 2) as u8;
            let b = ((i / 2) % 2) as u8;
            let o = ((i / 4) % 2) as u8;
            records.push(rec(i, a, b, o, o, None));
        }
        let reports = estimate_correlations(&build(records), GroupBy::None).unwrap();
        for p in &reports[0].pairs {
            assert_eq!(p.e, Some(1.0));
            assert_eq!(p.std_error, Some(0.0));
        }
    }

    #[test]
    fn unpopulated_pairs_are_undefined_not_imputed() {
        let records = vec![rec(0, 0, 0, 0, 1, None), rec(1, 0, 0, 1, 0, None)];
        let reports = estimate_correlations(&build(records), GroupBy::None).unwrap();
        let report = &reports[0];
        assert_eq!(report.pair(0, 0).e, Some(-1.0));
        for (a, b) in [(0, 1), (1, 0), (1, 1)] {
            assert_eq!(report.pair(a, b).e, None);
            assert_eq!(report.pair(a, b).count, 0);
        }
        let est = estimate_chsh(report, 4.0);
        assert_eq!(est.status, EstimateStatus::Unavailable);
        assert_eq!(est.missing_pairs.len(), 3);
        assert_eq!(est.s, None);
    }

    #[test]
    fn perfect_anticorrelation_gives_s_minus_two() {
        let mut records = Vec::new();
        for i in 0..80u64 {
            let a = (i % 2) as u8;
            let b = ((i / 2) % 2) as u8;
            let o = ((i / 4) % 2) as u8;
            records.push(rec(i, a, b, o, 1 - o, None));
        }
        let reports = estimate_correlations(&build(records), GroupBy::None).unwrap();
        let est = estimate_chsh(&reports[0], 4.0);
        assert_eq!(est.s, Some(-2.0));
        assert_eq!(est.violates_classical, Some(false));
    }

    #[test]
    fn grouping_requires_labels() {
        let records = vec![rec(0, 0, 0, 0, 1, Some(SelLabel::C0)), rec(1, 0, 0, 1, 0, None)];
        let err = estimate_correlations(&build(records), GroupBy::Selection).unwrap_err();
        assert!(matches!(err, Error::MissingSelection { run: 1 }));
    }

    #[test]
    fn monte_carlo_chsh_matches_exact_value() {
        let cfg = VConfig {
            state_policy: StatePolicy::Fixed(BellLabel::C0),
            angles: AngleConfig::default(),
        };
        let ens = run_v(&cfg, 200_000, 2024).unwrap();
        let reports = estimate_correlations(&ens, GroupBy::None).unwrap();
        let est = estimate_chsh(&reports[0], 4.0);
        let exact = chsh_value(&bell_state(BellLabel::C0), &AngleConfig::default()).unwrap();
        let s = est.s.unwrap();
        assert!((s - exact).abs() < 0.05, "s = {s}, exact = {exact}");
        assert_eq!(est.violates_classical, Some(true));
    }

    #[test]
    fn msbc_detects_induced_correlations_in_random_state_runs() {
        let cfg = VConfig {
            state_policy: StatePolicy::RandomUniform,
            angles: AngleConfig::default(),
        };
        let ens = run_v(&cfg, 100_000, 5).unwrap();
        let report = msbc_test(&ens, 4.0).unwrap();
        assert!(report.msbc_holds);
        assert_eq!(report.sub_reports.len(), 4);
        for d in report.discrepancies.iter().filter(|d| d.significant) {
            assert_eq!(d.direction, BiasDirection::Inducing);
        }
        assert!(report.max_discrepancy.unwrap() > 4.0);
    }

    #[test]
    fn msbc_detects_swap_selection_in_w_runs() {
        let ens = run_w(&AngleConfig::default(), 100_000, 6).unwrap();
        let report = msbc_test(&ens, 4.0).unwrap();
        assert!(report.msbc_holds);
    }

    #[test]
    fn msbc_stays_quiet_on_independent_labels() {
        let ens = run_product_control(&AngleConfig::default(), 100_000, 9).unwrap();
        let report = msbc_test(&ens, 4.0).unwrap();
        assert!(!report.msbc_holds, "max z = {:?}", report.max_discrepancy);
    }

    #[test]
    fn msbc_rejects_missing_labels() {
        let records = vec![rec(0, 0, 0, 0, 1, Some(SelLabel::C0)), rec(1, 0, 0, 1, 0, None)];
        assert!(matches!(
            msbc_test(&build(records), 4.0),
            Err(Error::MissingSelection { run: 1 })
        ));
    }

    #[test]
    fn msbc_labels_masking_direction() {
        // Group C0 perfectly correlated, group C1 uncorrelated; the super
        // ensemble sits in between, so C1 masks and C0 induces.
        let mut records = Vec::new();
        let mut run = 0;
        for a in 0..2u8 {
            for b in 0..2u8 {
                for i in 0..400u64 {
                    let o = (i % 2) as u8;
                    records.push(rec(run, a, b, o, o, Some(SelLabel::C0)));
                    run += 1;
                    // C1: outcomes independent, all four cells equally often.
                    let oa = (i % 2) as u8;
                    let ob = ((i / 2) % 2) as u8;
                    records.push(rec(run, a, b, oa, ob, Some(SelLabel::C1)));
                    run += 1;
                }
            }
        }
        records.sort_by_key(|r| r.run);
        let report = msbc_test(&build(records), 4.0).unwrap();
        assert!(report.msbc_holds);
        let directions: std::collections::BTreeMap<SelLabel, BiasDirection> = report
            .discrepancies
            .iter()
            .filter(|d| d.significant)
            .map(|d| (d.sel, d.direction))
            .collect();
        assert_eq!(directions[&SelLabel::C0], BiasDirection::Inducing);
        assert_eq!(directions[&SelLabel::C1], BiasDirection::Masking);
    }

    #[test]
    fn no_signalling_passes_on_quantum_runs() {
        let cfg = VConfig {
            state_policy: StatePolicy::Fixed(BellLabel::C0),
            angles: AngleConfig::default(),
        };
        let ens = run_v(&cfg, 100_000, 77).unwrap();
        let report = no_signalling_check(&ens, GroupBy::None, 4.0).unwrap();
        assert!(report.pass, "max z = {:?}", report.max_z);
        assert!(report.max_difference.unwrap() < 0.02);

        let w = run_w(&AngleConfig::default(), 100_000, 78).unwrap();
        let grouped = no_signalling_check(&w, GroupBy::Selection, 4.0).unwrap();
        assert!(grouped.pass);
        assert_eq!(grouped.checks.len(), 16);
    }

    #[test]
    fn no_signalling_flags_a_shifted_marginal() {
        // P(A=0) = 0.5 everywhere except (a=0, b=1), where it is 0.7.
        let mut records = Vec::new();
        let mut run = 0;
        for a in 0..2u8 {
            for b in 0..2u8 {
                let zeros = if a == 0 && b == 1 { 700 } else { 500 };
                for i in 0..1000u64 {
                    let oa = (i >= zeros) as u8;
                    let ob = (i % 2) as u8;
                    records.push(rec(run, a, b, oa, ob, None));
                    run += 1;
                }
            }
        }
        let report = no_signalling_check(&build(records), GroupBy::None, 4.0).unwrap();
        assert!(!report.pass);
        let failing: Vec<&MarginalCheck> = report
            .checks
            .iter()
            .filter(|c| c.pass == Some(false))
            .collect();
        assert!(failing
            .iter()
            .any(|c| matches!(c.side, Side::A) && c.local_setting == 0));
    }

    #[test]
    fn factorizability_holds_for_flat_and_fails_for_singlet() {
        let flat = VConfig {
            state_policy: StatePolicy::RandomUniform,
            angles: AngleConfig::default(),
        };
        let ens = run_v(&flat, 100_000, 31).unwrap();
        let report = factorizability_check(&ens, GroupBy::None, 4.0).unwrap();
        assert!(report.pass);

        let fixed = VConfig {
            state_policy: StatePolicy::Fixed(BellLabel::C0),
            angles: AngleConfig::default(),
        };
        let ens = run_v(&fixed, 100_000, 32).unwrap();
        let report = factorizability_check(&ens, GroupBy::None, 4.0).unwrap();
        assert!(!report.pass);
        let worst = report
            .pairs
            .iter()
            .filter_map(|p| p.max_gap)
            .fold(0.0f64, f64::max);
        // Exact gap at (a0,b0): |sin^2(pi/8)/2 - 1/4| ~ 0.177.
        let exact = (joint_probabilities(
            &bell_state(BellLabel::C0),
            AngleConfig::default().a0,
            AngleConfig::default().b0,
        )
        .unwrap()
        .get(0, 0)
            - 0.25)
            .abs();
        assert!(worst > 0.1, "worst gap {worst}");
        assert!((worst - exact).abs() < 0.02);
    }

    #[test]
    fn factorizability_flags_single_record_as_insufficient() {
        let records = vec![rec(0, 0, 0, 0, 1, None)];
        let report = factorizability_check(&build(records), GroupBy::None, 4.0).unwrap();
        assert!(report.pass);
        for p in &report.pairs {
            assert_eq!(p.status, CheckStatus::InsufficientData);
        }
    }

    #[test]
    fn chsh_best_recovers_violation_for_every_bell_state() {
        for label in BellLabel::ALL {
            let cfg = VConfig {
                state_policy: StatePolicy::Fixed(label),
                angles: AngleConfig::default(),
            };
            let ens = run_v(&cfg, 100_000, 40 + label.index() as u64).unwrap();
            let reports = estimate_correlations(&ens, GroupBy::None).unwrap();
            let est = estimate_chsh_best(&reports[0], 4.0);
            let s = est.s.unwrap();
            assert!(
                s.abs() > 2.7,
                "{label}: best |S| = {} under {:?}",
                s.abs(),
                est.variant
            );
            assert_eq!(est.violates_classical, Some(true));
        }
    }

    #[test]
    fn empty_ensemble_is_rejected() {
        let meta = EnsembleMeta {
            seed: 0,
            config_digest: "x".into(),
            shots: 0,
            attempted: None,
            angles: AngleConfig::default(),
        };
        let ens = Ensemble::from_parts(meta, Vec::new()).unwrap();
        assert!(matches!(
            estimate_correlations(&ens, GroupBy::None),
            Err(Error::EmptyEnsemble)
        ));
    }
}
