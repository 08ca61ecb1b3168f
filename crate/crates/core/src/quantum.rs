//! Exact finite-dimensional quantum probability engine.
//!
//! Covers the four Bell states, two-outcome measurements in rotated real
//! bases, Born-rule joint distributions, convex mixtures, and the four-outcome
//! Bell-state measurement used for entanglement swapping. Amplitude vectors
//! are indexed in the computational basis with the first qubit as the most
//! significant bit.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for normalization checks.
pub const NORM_TOL: f64 = 1e-12;

/// Probability below which a measurement branch is treated as absent.
const ZERO_BRANCH: f64 = 1e-12;

/// Label for the four Bell states. `C0` is the singlet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BellLabel {
    C0,
    C1,
    C2,
    C3,
}

impl BellLabel {
    pub const ALL: [BellLabel; 4] = [BellLabel::C0, BellLabel::C1, BellLabel::C2, BellLabel::C3];

    pub fn index(self) -> usize {
        match self {
            BellLabel::C0 => 0,
            BellLabel::C1 => 1,
            BellLabel::C2 => 2,
            BellLabel::C3 => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<BellLabel> {
        Self::ALL.get(i).copied()
    }
}

impl std::fmt::Display for BellLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "C{}", self.index())
    }
}

/// Complex amplitude vector over the two-qubit (dim 4) or four-qubit (dim 16)
/// computational basis. Always normalized to unit L2 norm within `NORM_TOL`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVec {
    amps: Vec<Complex64>,
}

impl StateVec {
    /// Build a state from raw amplitudes. Rejects dimensions other than 4 or
    /// 16 and vectors whose L2 norm differs from 1 by more than `NORM_TOL`.
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 4 && amps.len() != 16 {
            return Err(Error::InvalidDimension {
                expected: 4,
                got: amps.len(),
            });
        }
        let norm = l2_norm(&amps);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(StateVec { amps })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn num_qubits(&self) -> usize {
        if self.amps.len() == 4 {
            2
        } else {
            4
        }
    }

    /// Tensor product of two two-qubit states, giving the four-qubit state
    /// with the left factor in the high bits.
    pub fn tensor(&self, other: &StateVec) -> Result<StateVec> {
        if self.dim() != 4 || other.dim() != 4 {
            return Err(Error::InvalidDimension {
                expected: 4,
                got: self.dim().max(other.dim()),
            });
        }
        let mut amps = Vec::with_capacity(16);
        for x in &self.amps {
            for y in &other.amps {
                amps.push(x * y);
            }
        }
        StateVec::new(amps)
    }
}

fn l2_norm(amps: &[Complex64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// The four canonical Bell states, amplitude order |00>, |01>, |10>, |11>:
///
/// * `C0` = (|01> - |10>)/sqrt(2)  (singlet)
/// * `C1` = (|01> + |10>)/sqrt(2)
/// * `C2` = (|00> + |11>)/sqrt(2)
/// * `C3` = (|00> - |11>)/sqrt(2)
pub fn bell_state(label: BellLabel) -> StateVec {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let z = Complex64::new(0.0, 0.0);
    let amps = match label {
        BellLabel::C0 => vec![z, h, -h, z],
        BellLabel::C1 => vec![z, h, h, z],
        BellLabel::C2 => vec![h, z, z, h],
        BellLabel::C3 => vec![h, z, z, -h],
    };
    StateVec::new(amps).expect("Bell states are normalized by construction")
}

/// Analyzer angles in radians, one per setting bit on each side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleConfig {
    pub a0: f64,
    pub a1: f64,
    pub b0: f64,
    pub b1: f64,
}

impl AngleConfig {
    pub fn new(a0: f64, a1: f64, b0: f64, b1: f64) -> Result<Self> {
        let cfg = AngleConfig { a0, a1, b0, b1 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a0", self.a0),
            ("a1", self.a1),
            ("b0", self.b0),
            ("b1", self.b1),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "angle {name} must be finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Alice's analyzer angle for setting bit `a`.
    pub fn alice(&self, a: u8) -> f64 {
        if a == 0 {
            self.a0
        } else {
            self.a1
        }
    }

    /// Bob's analyzer angle for setting bit `b`.
    pub fn bob(&self, b: u8) -> f64 {
        if b == 0 {
            self.b0
        } else {
            self.b1
        }
    }
}

impl Default for AngleConfig {
    /// CHSH-optimal quadruple (0, pi/4, pi/8, 3pi/8).
    fn default() -> Self {
        AngleConfig {
            a0: 0.0,
            a1: FRAC_PI_4,
            b0: FRAC_PI_8,
            b1: 3.0 * FRAC_PI_8,
        }
    }
}

/// Joint outcome distribution for fixed settings: four probabilities indexed
/// by (A, B) in the fixed cell order (0,0), (0,1), (1,0), (1,1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointDist {
    p: [f64; 4],
}

impl JointDist {
    pub fn new(p: [f64; 4]) -> Result<Self> {
        for (i, v) in p.iter().enumerate() {
            if !(-NORM_TOL..=1.0 + NORM_TOL).contains(v) {
                return Err(Error::InvalidArgument(format!(
                    "probability {i} out of range: {v}"
                )));
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(JointDist { p })
    }

    pub fn get(&self, outcome_a: u8, outcome_b: u8) -> f64 {
        self.p[cell_index(outcome_a, outcome_b)]
    }

    pub fn cells(&self) -> [f64; 4] {
        self.p
    }

    /// E = P(A = B) - P(A != B), in [-1, 1].
    pub fn correlator(&self) -> f64 {
        self.p[0] + self.p[3] - self.p[1] - self.p[2]
    }

    /// P(A = outcome_a), marginal over B.
    pub fn marginal_a(&self, outcome_a: u8) -> f64 {
        self.get(outcome_a, 0) + self.get(outcome_a, 1)
    }

    /// P(B = outcome_b), marginal over A.
    pub fn marginal_b(&self, outcome_b: u8) -> f64 {
        self.get(0, outcome_b) + self.get(1, outcome_b)
    }
}

/// Fixed cell order: index = A*2 + B.
pub fn cell_index(outcome_a: u8, outcome_b: u8) -> usize {
    (outcome_a as usize) * 2 + (outcome_b as usize)
}

/// Measurement basis vector at analyzer angle `theta`:
/// outcome 0 -> (cos t, sin t), outcome 1 -> (-sin t, cos t).
fn basis_vector(theta: f64, outcome: u8) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    if outcome == 0 {
        [c, s]
    } else {
        [-s, c]
    }
}

/// Born-rule joint distribution for a two-qubit state measured in the rotated
/// real bases at angles `alpha` (first qubit) and `beta` (second qubit).
pub fn joint_probabilities(state: &StateVec, alpha: f64, beta: f64) -> Result<JointDist> {
    if state.dim() != 4 {
        return Err(Error::InvalidDimension {
            expected: 4,
            got: state.dim(),
        });
    }
    let norm = l2_norm(state.amplitudes());
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { norm });
    }
    let amps = state.amplitudes();
    let mut p = [0.0; 4];
    for outcome_a in 0..2u8 {
        let u = basis_vector(alpha, outcome_a);
        for outcome_b in 0..2u8 {
            let v = basis_vector(beta, outcome_b);
            let mut inner = Complex64::new(0.0, 0.0);
            for (i, &ui) in u.iter().enumerate() {
                for (j, &vj) in v.iter().enumerate() {
                    inner += ui * vj * amps[i * 2 + j];
                }
            }
            p[cell_index(outcome_a, outcome_b)] = inner.norm_sqr();
        }
    }
    JointDist::new(p)
}

/// Convex mixture of the four Bell-state distributions at the given angles.
pub fn mixed_joint_probabilities(weights: &[f64; 4], alpha: f64, beta: f64) -> Result<JointDist> {
    validate_weights(weights)?;
    let mut p = [0.0; 4];
    for label in BellLabel::ALL {
        let dist = joint_probabilities(&bell_state(label), alpha, beta)?;
        for (acc, cell) in p.iter_mut().zip(dist.cells()) {
            *acc += weights[label.index()] * cell;
        }
    }
    JointDist::new(p)
}

pub(crate) fn validate_weights(weights: &[f64; 4]) -> Result<()> {
    for (i, w) in weights.iter().enumerate() {
        if !w.is_finite() || *w < 0.0 {
            return Err(Error::InvalidWeights(format!(
                "weight {i} must be a finite non-negative number, got {w}"
            )));
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidWeights(format!(
            "weights sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// Which of the four correlators carries the minus sign in the CHSH sum over
/// the pair order (a0,b0), (a0,b1), (a1,b0), (a1,b1). Every placement gives a
/// combination bounded by 2 for factorizable models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChshVariant {
    #[serde(rename = "minus_a0b0")]
    MinusA0B0,
    #[serde(rename = "minus_a0b1")]
    MinusA0B1,
    #[serde(rename = "minus_a1b0")]
    MinusA1B0,
    #[serde(rename = "minus_a1b1")]
    MinusA1B1,
}

impl ChshVariant {
    pub const ALL: [ChshVariant; 4] = [
        ChshVariant::MinusA0B0,
        ChshVariant::MinusA0B1,
        ChshVariant::MinusA1B0,
        ChshVariant::MinusA1B1,
    ];

    /// The placement used when a single fixed combination is wanted:
    /// S = E(a0,b0) - E(a0,b1) + E(a1,b0) + E(a1,b1). At the default angles
    /// this reaches |S| = 2*sqrt(2) on the singlet.
    pub fn canonical() -> ChshVariant {
        ChshVariant::MinusA0B1
    }

    /// Signs over the pair order (a0,b0), (a0,b1), (a1,b0), (a1,b1).
    pub fn signs(self) -> [f64; 4] {
        match self {
            ChshVariant::MinusA0B0 => [-1.0, 1.0, 1.0, 1.0],
            ChshVariant::MinusA0B1 => [1.0, -1.0, 1.0, 1.0],
            ChshVariant::MinusA1B0 => [1.0, 1.0, -1.0, 1.0],
            ChshVariant::MinusA1B1 => [1.0, 1.0, 1.0, -1.0],
        }
    }
}

impl std::fmt::Display for ChshVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let term = match self {
            ChshVariant::MinusA0B0 => "(a0,b0)",
            ChshVariant::MinusA0B1 => "(a0,b1)",
            ChshVariant::MinusA1B0 => "(a1,b0)",
            ChshVariant::MinusA1B1 => "(a1,b1)",
        };
        write!(f, "minus on E{term}")
    }
}

/// The four exact correlators over the pair order (a0,b0), (a0,b1), (a1,b0),
/// (a1,b1).
pub fn correlator_table(state: &StateVec, angles: &AngleConfig) -> Result<[f64; 4]> {
    angles.validate()?;
    let mut e = [0.0; 4];
    for (i, (a, b)) in setting_pairs().into_iter().enumerate() {
        e[i] = joint_probabilities(state, angles.alice(a), angles.bob(b))?.correlator();
    }
    Ok(e)
}

/// Setting pairs in the fixed order (0,0), (0,1), (1,0), (1,1).
pub fn setting_pairs() -> [(u8, u8); 4] {
    [(0, 0), (0, 1), (1, 0), (1, 1)]
}

/// Exact CHSH value under the canonical sign placement.
pub fn chsh_value(state: &StateVec, angles: &AngleConfig) -> Result<f64> {
    chsh_value_variant(state, angles, ChshVariant::canonical())
}

/// Exact CHSH value under an explicit sign placement.
pub fn chsh_value_variant(
    state: &StateVec,
    angles: &AngleConfig,
    variant: ChshVariant,
) -> Result<f64> {
    let e = correlator_table(state, angles)?;
    let signs = variant.signs();
    Ok((0..4).map(|i| signs[i] * e[i]).sum())
}

/// Exact CHSH maximized over the four sign placements; returns the
/// maximizing placement and its (signed) value.
pub fn chsh_best(state: &StateVec, angles: &AngleConfig) -> Result<(ChshVariant, f64)> {
    let e = correlator_table(state, angles)?;
    let mut best = (ChshVariant::canonical(), f64::NEG_INFINITY);
    for variant in ChshVariant::ALL {
        let signs = variant.signs();
        let s: f64 = (0..4).map(|i| signs[i] * e[i]).sum();
        if s.abs() > best.1.abs() || best.1 == f64::NEG_INFINITY {
            best = (variant, s);
        }
    }
    Ok(best)
}

/// One branch of a Bell-state measurement: outcome label, its probability,
/// and the normalized conditional state of the unmeasured qubits. Branches
/// with probability below 1e-12 carry no conditional state.
#[derive(Debug, Clone)]
pub struct BsmBranch {
    pub label: BellLabel,
    pub probability: f64,
    pub conditional: Option<StateVec>,
}

/// Bell-state measurement on the two inner qubits (qubits 2 and 3 of a
/// four-qubit state, counting from 1). For each Bell projector the branch
/// probability and the conditional state of qubits 1 and 4 are returned;
/// probabilities sum to 1.
pub fn bsm_decompose(state: &StateVec) -> Result<[BsmBranch; 4]> {
    if state.dim() != 16 {
        return Err(Error::InvalidDimension {
            expected: 16,
            got: state.dim(),
        });
    }
    let norm = l2_norm(state.amplitudes());
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { norm });
    }
    let amps = state.amplitudes();
    let branches = BellLabel::ALL.map(|label| {
        let basis = bell_state(label);
        let b = basis.amplitudes();
        // Project qubits 2,3 onto the Bell state; what remains lives on
        // qubits 1,4. Index layout: |q1 q2 q3 q4> = q1*8 + q2*4 + q3*2 + q4.
        let mut residual = [Complex64::new(0.0, 0.0); 4];
        for q1 in 0..2usize {
            for q4 in 0..2usize {
                let mut acc = Complex64::new(0.0, 0.0);
                for q2 in 0..2usize {
                    for q3 in 0..2usize {
                        acc += b[q2 * 2 + q3].conj() * amps[q1 * 8 + q2 * 4 + q3 * 2 + q4];
                    }
                }
                residual[q1 * 2 + q4] = acc;
            }
        }
        let probability: f64 = residual.iter().map(|a| a.norm_sqr()).sum();
        let conditional = if probability > ZERO_BRANCH {
            let scale = probability.sqrt();
            let amps = residual.iter().map(|a| a / scale).collect();
            Some(StateVec::new(amps).expect("projected branch renormalizes"))
        } else {
            None
        };
        BsmBranch {
            label,
            probability,
            conditional,
        }
    });
    Ok(branches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-10;

    /// Independent oracle: Born probability via an explicit rank-1 projector,
    /// <psi| P |psi> with P = |u x v><u x v| built as a dense 4x4 matrix.
    fn projector_probability(state: &StateVec, alpha: f64, beta: f64, a: u8, b: u8) -> f64 {
        let u = basis_vector(alpha, a);
        let v = basis_vector(beta, b);
        let mut ket = [0.0f64; 4];
        for i in 0..2 {
            for j in 0..2 {
                ket[i * 2 + j] = u[i] * v[j];
            }
        }
        let mut proj = [[0.0f64; 4]; 4];
        for m in 0..4 {
            for n in 0..4 {
                proj[m][n] = ket[m] * ket[n];
            }
        }
        let amps = state.amplitudes();
        let mut expectation = Complex64::new(0.0, 0.0);
        for m in 0..4 {
            for n in 0..4 {
                expectation += amps[m].conj() * proj[m][n] * amps[n];
            }
        }
        expectation.re
    }

    /// Closed-form correlators for the four Bell states.
    fn exact_correlator(label: BellLabel, alpha: f64, beta: f64) -> f64 {
        match label {
            BellLabel::C0 => -(2.0 * (beta - alpha)).cos(),
            BellLabel::C1 => -(2.0 * (alpha + beta)).cos(),
            BellLabel::C2 => (2.0 * (alpha - beta)).cos(),
            BellLabel::C3 => (2.0 * (alpha + beta)).cos(),
        }
    }

    #[test]
    fn bell_state_amplitudes() {
        let c0 = bell_state(BellLabel::C0);
        let expected = [0.0, FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0];
        for (amp, want) in c0.amplitudes().iter().zip(expected) {
            assert!((amp.re - want).abs() < TOL && amp.im == 0.0);
        }
        let c2 = bell_state(BellLabel::C2);
        let expected = [FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2];
        for (amp, want) in c2.amplitudes().iter().zip(expected) {
            assert!((amp.re - want).abs() < TOL && amp.im == 0.0);
        }
        for label in BellLabel::ALL {
            let norm = l2_norm(bell_state(label).amplitudes());
            assert!((norm - 1.0).abs() < NORM_TOL);
        }
    }

    #[test]
    fn singlet_anticorrelates_at_equal_angles() {
        let c0 = bell_state(BellLabel::C0);
        for angle in [0.0, 0.3, 1.1, -0.7] {
            let d = joint_probabilities(&c0, angle, angle).unwrap();
            assert!(d.get(0, 0).abs() < TOL);
            assert!(d.get(1, 1).abs() < TOL);
            assert!((d.get(0, 1) - 0.5).abs() < TOL);
            assert!((d.get(1, 0) - 0.5).abs() < TOL);
        }
    }

    #[test]
    fn singlet_quarter_cells_match_projector_oracle() {
        // p(same) = sin^2(beta - alpha)/2 per cell; at beta - alpha = pi/4
        // every cell is exactly 1/4.
        let c0 = bell_state(BellLabel::C0);
        let d = joint_probabilities(&c0, 0.0, FRAC_PI_4).unwrap();
        for a in 0..2u8 {
            for b in 0..2u8 {
                assert!((d.get(a, b) - 0.25).abs() < TOL);
                let oracle = projector_probability(&c0, 0.0, FRAC_PI_4, a, b);
                assert!((d.get(a, b) - oracle).abs() < TOL);
            }
        }
    }

    #[test]
    fn phi_plus_in_computational_basis() {
        let d = joint_probabilities(&bell_state(BellLabel::C2), 0.0, 0.0).unwrap();
        assert!((d.get(0, 0) - 0.5).abs() < TOL);
        assert!((d.get(1, 1) - 0.5).abs() < TOL);
        assert!(d.get(0, 1).abs() < TOL);
        assert!(d.get(1, 0).abs() < TOL);
    }

    #[test]
    fn born_rule_matches_projector_oracle_at_random_angles() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let alpha = rng.gen_range(-PI..PI);
            let beta = rng.gen_range(-PI..PI);
            for label in BellLabel::ALL {
                let state = bell_state(label);
                let d = joint_probabilities(&state, alpha, beta).unwrap();
                for a in 0..2u8 {
                    for b in 0..2u8 {
                        let oracle = projector_probability(&state, alpha, beta, a, b);
                        assert!((d.get(a, b) - oracle).abs() < TOL);
                    }
                }
            }
        }
    }

    #[test]
    fn correlator_examples() {
        let uniform = JointDist::new([0.25; 4]).unwrap();
        assert_eq!(uniform.correlator(), 0.0);

        let c0 = bell_state(BellLabel::C0);
        let equal = joint_probabilities(&c0, 0.4, 0.4).unwrap();
        assert!((equal.correlator() + 1.0).abs() < TOL);

        // E = -cos 2(beta - alpha) at beta - alpha = pi/8 gives -sqrt(2)/2.
        let eighth = joint_probabilities(&c0, 0.0, FRAC_PI_8).unwrap();
        assert!((eighth.correlator() + FRAC_1_SQRT_2).abs() < TOL);
    }

    #[test]
    fn closed_form_agreement_for_all_bell_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let alpha = rng.gen_range(-PI..PI);
            let beta = rng.gen_range(-PI..PI);
            for label in BellLabel::ALL {
                let d = joint_probabilities(&bell_state(label), alpha, beta).unwrap();
                let want = exact_correlator(label, alpha, beta);
                assert!(
                    (d.correlator() - want).abs() < TOL,
                    "{label} at ({alpha}, {beta}): {} vs {want}",
                    d.correlator()
                );
            }
        }
    }

    #[test]
    fn chsh_reaches_tsirelson_on_singlet_at_default_angles() {
        let s = chsh_value(&bell_state(BellLabel::C0), &AngleConfig::default()).unwrap();
        assert!((s.abs() - 2.0 * SQRT_2).abs() < 1e-10, "got {s}");
    }

    #[test]
    fn chsh_equal_angles_is_minus_two() {
        let angles = AngleConfig::new(0.2, 0.2, 0.2, 0.2).unwrap();
        let s = chsh_value(&bell_state(BellLabel::C0), &angles).unwrap();
        assert!((s + 2.0).abs() < TOL);
    }

    #[test]
    fn product_state_respects_classical_bound_on_angle_grid() {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let product = StateVec::new(vec![one, zero, zero, zero]).unwrap();
        let step = PI / 8.0;
        for i in 0..8 {
            for j in 0..8 {
                for k in 0..8 {
                    for l in 0..8 {
                        let angles = AngleConfig::new(
                            i as f64 * step,
                            j as f64 * step,
                            k as f64 * step,
                            l as f64 * step,
                        )
                        .unwrap();
                        for variant in ChshVariant::ALL {
                            let s = chsh_value_variant(&product, &angles, variant).unwrap();
                            assert!(s.abs() <= 2.0 + 1e-9);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn best_variant_reaches_tsirelson_for_every_bell_state() {
        let angles = AngleConfig::default();
        for label in BellLabel::ALL {
            let (_, s) = chsh_best(&bell_state(label), &angles).unwrap();
            assert!(
                (s.abs() - 2.0 * SQRT_2).abs() < 1e-9,
                "{label}: |S| = {}",
                s.abs()
            );
        }
    }

    #[test]
    fn uniform_mixture_is_flat_at_random_angles() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = [0.25; 4];
        for _ in 0..10 {
            let alpha = rng.gen_range(-PI..PI);
            let beta = rng.gen_range(-PI..PI);
            let d = mixed_joint_probabilities(&w, alpha, beta).unwrap();
            for cell in d.cells() {
                assert!((cell - 0.25).abs() < TOL);
            }
        }
    }

    #[test]
    fn degenerate_mixture_equals_pure_state() {
        let w = [1.0, 0.0, 0.0, 0.0];
        let mixed = mixed_joint_probabilities(&w, 0.3, 0.9).unwrap();
        let pure = joint_probabilities(&bell_state(BellLabel::C0), 0.3, 0.9).unwrap();
        for (m, p) in mixed.cells().iter().zip(pure.cells()) {
            assert!((m - p).abs() < TOL);
        }
    }

    #[test]
    fn psi_mixture_anticorrelates_in_computational_basis() {
        let w = [0.5, 0.5, 0.0, 0.0];
        let d = mixed_joint_probabilities(&w, 0.0, 0.0).unwrap();
        assert!((d.get(0, 1) - 0.5).abs() < TOL);
        assert!((d.get(1, 0) - 0.5).abs() < TOL);
        assert!(d.get(0, 0).abs() < TOL);
        assert!(d.get(1, 1).abs() < TOL);
    }

    #[test]
    fn invalid_weights_rejected() {
        assert!(mixed_joint_probabilities(&[0.5, 0.5, 0.5, -0.5], 0.0, 0.0).is_err());
        assert!(mixed_joint_probabilities(&[0.3, 0.3, 0.3, 0.3], 0.0, 0.0).is_err());
    }

    #[test]
    fn bsm_on_two_singlets_swaps_entanglement() {
        let c0 = bell_state(BellLabel::C0);
        let four = c0.tensor(&c0).unwrap();
        let branches = bsm_decompose(&four).unwrap();
        let total: f64 = branches.iter().map(|b| b.probability).sum();
        assert!((total - 1.0).abs() < NORM_TOL);
        for branch in &branches {
            assert!((branch.probability - 0.25).abs() < TOL);
            let cond = branch.conditional.as_ref().expect("branch populated");
            // Fidelity with the matching Bell state is 1 up to global phase.
            let target = bell_state(branch.label);
            let overlap: Complex64 = target
                .amplitudes()
                .iter()
                .zip(cond.amplitudes())
                .map(|(t, c)| t.conj() * c)
                .sum();
            assert!(
                (overlap.norm_sqr() - 1.0).abs() < TOL,
                "{}: fidelity {}",
                branch.label,
                overlap.norm_sqr()
            );
        }
    }

    #[test]
    fn bsm_on_all_zeros_populates_phi_branches_only() {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let mut amps = vec![zero; 16];
        amps[0] = one;
        let state = StateVec::new(amps).unwrap();
        let branches = bsm_decompose(&state).unwrap();
        // |00> on the inner pair = (C2 + C3)/sqrt(2).
        for branch in &branches {
            match branch.label {
                BellLabel::C2 | BellLabel::C3 => {
                    assert!((branch.probability - 0.5).abs() < TOL);
                    let cond = branch.conditional.as_ref().unwrap();
                    assert!((cond.amplitudes()[0].norm() - 1.0).abs() < TOL);
                }
                _ => {
                    assert!(branch.probability < 1e-12);
                    assert!(branch.conditional.is_none());
                }
            }
        }
    }

    #[test]
    fn bsm_probabilities_sum_to_one_for_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let raw: Vec<Complex64> = (0..16)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let norm = l2_norm(&raw);
            let amps: Vec<Complex64> = raw.into_iter().map(|a| a / norm).collect();
            let state = StateVec::new(amps).unwrap();
            let branches = bsm_decompose(&state).unwrap();
            let total: f64 = branches.iter().map(|b| b.probability).sum();
            assert!((total - 1.0).abs() < 1e-10);
            for branch in &branches {
                if let Some(cond) = &branch.conditional {
                    assert!((l2_norm(cond.amplitudes()) - 1.0).abs() < NORM_TOL);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_dimensions_and_norms() {
        let one = Complex64::new(1.0, 0.0);
        assert!(StateVec::new(vec![one; 3]).is_err());
        assert!(StateVec::new(vec![one; 4]).is_err()); // norm 2
        let c0 = bell_state(BellLabel::C0);
        let four = c0.tensor(&c0).unwrap();
        assert!(joint_probabilities(&four, 0.0, 0.0).is_err());
        assert!(bsm_decompose(&c0).is_err());
    }

    #[test]
    fn marginals_are_independent_of_remote_angle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for label in BellLabel::ALL {
            let state = bell_state(label);
            for _ in 0..25 {
                let alpha = rng.gen_range(-PI..PI);
                let beta1 = rng.gen_range(-PI..PI);
                let beta2 = rng.gen_range(-PI..PI);
                let d1 = joint_probabilities(&state, alpha, beta1).unwrap();
                let d2 = joint_probabilities(&state, alpha, beta2).unwrap();
                assert!((d1.marginal_a(0) - d2.marginal_a(0)).abs() < TOL);
                let d3 = joint_probabilities(&state, beta1, alpha).unwrap();
                let d4 = joint_probabilities(&state, beta2, alpha).unwrap();
                assert!((d3.marginal_b(0) - d4.marginal_b(0)).abs() < TOL);
            }
        }
    }
}
