//! Ensemble generators for V-shaped and W-shaped Bell experiments.
//!
//! Every record draws from its own deterministic substream (see [`crate::rng`]),
//! so a run is fully determined by (config, shots, seed) and can be generated
//! in arbitrary shards.

use serde::Serialize;

use crate::ensemble::{config_digest, Ensemble, EnsembleMeta, Geometry, RunRecord, SelLabel};
use crate::error::{Error, Result};
use crate::quantum::{
    bell_state, bsm_decompose, joint_probabilities, validate_weights, AngleConfig, BellLabel,
    JointDist,
};
use crate::rng::{sample_index, StreamFactory};
use rand::Rng;

/// How the initial Bell state is chosen on each run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StatePolicy {
    /// Every run uses the same Bell state.
    Fixed(BellLabel),
    /// Uniform draw over the four Bell states.
    RandomUniform,
    /// Weighted draw over the four Bell states.
    Weighted([f64; 4]),
}

/// Configuration of a V-shaped run. Settings are always independent uniform
/// bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VConfig {
    pub state_policy: StatePolicy,
    pub angles: AngleConfig,
}

impl VConfig {
    pub fn validate(&self) -> Result<()> {
        self.angles.validate()?;
        if let StatePolicy::Weighted(w) = &self.state_policy {
            validate_weights(w)?;
        }
        Ok(())
    }
}

fn require_shots(shots: u64) -> Result<()> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    Ok(())
}

/// Born-rule distributions for one state at all four setting pairs,
/// indexed [a][b].
fn dist_table(state: &crate::quantum::StateVec, angles: &AngleConfig) -> Result<[[JointDist; 2]; 2]> {
    let mk = |a: u8, b: u8| joint_probabilities(state, angles.alice(a), angles.bob(b));
    Ok([[mk(0, 0)?, mk(0, 1)?], [mk(1, 0)?, mk(1, 1)?]])
}

fn bell_dist_tables(angles: &AngleConfig) -> Result<[[[JointDist; 2]; 2]; 4]> {
    let mut out = [[[JointDist::new([0.25; 4])?; 2]; 2]; 4];
    for label in BellLabel::ALL {
        out[label.index()] = dist_table(&bell_state(label), angles)?;
    }
    Ok(out)
}

/// Draw an (A, B) cell from a joint distribution by inverse CDF over the
/// fixed cell order (0,0), (0,1), (1,0), (1,1).
fn sample_cell(dist: &JointDist, u: f64) -> (u8, u8) {
    let idx = sample_index(&dist.cells(), u);
    ((idx / 2) as u8, (idx % 2) as u8)
}

#[derive(Serialize)]
struct VDigest<'a> {
    protocol: &'static str,
    config: &'a VConfig,
    shots: u64,
    seed: u64,
}

/// Run a V-shaped Bell experiment: per shot, choose the initial Bell state
/// per policy, draw independent uniform settings, and sample the outcome
/// pair from the exact Born-rule distribution. The chosen state is recorded
/// as the selection label.
pub fn run_v(config: &VConfig, shots: u64, seed: u64) -> Result<Ensemble> {
    config.validate()?;
    require_shots(shots)?;
    let records = run_v_range(config, 0, shots, seed)?;
    let digest = config_digest(&VDigest {
        protocol: "v",
        config,
        shots,
        seed,
    });
    Ensemble::from_parts(
        EnsembleMeta {
            seed,
            config_digest: digest,
            shots,
            attempted: None,
            angles: config.angles,
        },
        records,
    )
}

/// Generate the V-run records for run ids in `[start, end)`. Concatenating
/// shards reproduces the single-pass output record-for-record.
pub fn run_v_range(config: &VConfig, start: u64, end: u64, seed: u64) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let tables = bell_dist_tables(&config.angles)?;
    let factory = StreamFactory::new(seed);
    let mut records = Vec::with_capacity((end - start) as usize);
    for run in start..end {
        let mut rng = factory.stream(run);
        // Draw order per record: state, a, b, outcome.
        let state_idx = match config.state_policy {
            StatePolicy::Fixed(label) => label.index(),
            StatePolicy::RandomUniform => rng.gen_range(0..4),
            StatePolicy::Weighted(w) => sample_index(&w, rng.gen::<f64>()),
        };
        let a = rng.gen::<bool>() as u8;
        let b = rng.gen::<bool>() as u8;
        let (outcome_a, outcome_b) =
            sample_cell(&tables[state_idx][a as usize][b as usize], rng.gen::<f64>());
        records.push(RunRecord {
            run,
            a,
            b,
            outcome_a,
            outcome_b,
            sel: Some(SelLabel::state(state_idx).expect("index in range")),
            geometry: Geometry::V,
        });
    }
    Ok(records)
}

#[derive(Serialize)]
struct WDigest<'a> {
    protocol: &'static str,
    angles: &'a AngleConfig,
    shots: u64,
    seed: u64,
}

/// Run a W-shaped entanglement-swapping experiment: two singlet pairs per
/// shot, a Bell-state measurement on the inner particles, then outcome
/// sampling on the outer pair conditioned on the measurement branch. The
/// branch label M_i is recorded as the selection label.
pub fn run_w(angles: &AngleConfig, shots: u64, seed: u64) -> Result<Ensemble> {
    angles.validate()?;
    require_shots(shots)?;
    let records = run_w_range(angles, 0, shots, seed)?;
    let digest = config_digest(&WDigest {
        protocol: "w",
        angles,
        shots,
        seed,
    });
    Ensemble::from_parts(
        EnsembleMeta {
            seed,
            config_digest: digest,
            shots,
            attempted: None,
            angles: *angles,
        },
        records,
    )
}

/// W-run records for run ids in `[start, end)`, shard-stable like
/// [`run_v_range`].
pub fn run_w_range(angles: &AngleConfig, start: u64, end: u64, seed: u64) -> Result<Vec<RunRecord>> {
    angles.validate()?;
    let singlet = bell_state(BellLabel::C0);
    let four = singlet.tensor(&singlet)?;
    let branches = bsm_decompose(&four)?;
    let probs: Vec<f64> = branches.iter().map(|b| b.probability).collect();
    let mut tables = Vec::with_capacity(4);
    for branch in &branches {
        let cond = branch
            .conditional
            .as_ref()
            .expect("two-singlet swap populates every branch");
        tables.push(dist_table(cond, angles)?);
    }
    let factory = StreamFactory::new(seed);
    let mut records = Vec::with_capacity((end - start) as usize);
    for run in start..end {
        let mut rng = factory.stream(run);
        // Draw order per record: measurement branch, a, b, outcome.
        let m = sample_index(&probs, rng.gen::<f64>());
        let a = rng.gen::<bool>() as u8;
        let b = rng.gen::<bool>() as u8;
        let (outcome_a, outcome_b) =
            sample_cell(&tables[m][a as usize][b as usize], rng.gen::<f64>());
        records.push(RunRecord {
            run,
            a,
            b,
            outcome_a,
            outcome_b,
            sel: Some(SelLabel::measurement(m).expect("index in range")),
            geometry: Geometry::W,
        });
    }
    Ok(records)
}

#[derive(Serialize)]
struct ControlDigest<'a> {
    protocol: &'static str,
    angles: &'a AngleConfig,
    shots: u64,
    seed: u64,
}

/// Negative-control generator: outcomes from the product state |00>, with a
/// selection label drawn by an independent uniform four-way coin. The labels
/// carry no information about the outcomes, so no selection-bias test should
/// fire on this ensemble.
pub fn run_product_control(angles: &AngleConfig, shots: u64, seed: u64) -> Result<Ensemble> {
    angles.validate()?;
    require_shots(shots)?;
    let factory = StreamFactory::new(seed);
    let mut records = Vec::with_capacity(shots as usize);
    for run in 0..shots {
        let mut rng = factory.stream(run);
        let sel = SelLabel::state(rng.gen_range(0..4)).expect("index in range");
        let a = rng.gen::<bool>() as u8;
        let b = rng.gen::<bool>() as u8;
        // Measuring |0> at angle t gives outcome 0 with probability cos^2 t.
        let p_a0 = angles.alice(a).cos().powi(2);
        let p_b0 = angles.bob(b).cos().powi(2);
        let outcome_a = (rng.gen::<f64>() >= p_a0) as u8;
        let outcome_b = (rng.gen::<f64>() >= p_b0) as u8;
        records.push(RunRecord {
            run,
            a,
            b,
            outcome_a,
            outcome_b,
            sel: Some(sel),
            geometry: Geometry::V,
        });
    }
    let digest = config_digest(&ControlDigest {
        protocol: "product_control",
        angles,
        shots,
        seed,
    });
    Ensemble::from_parts(
        EnsembleMeta {
            seed,
            config_digest: digest,
            shots,
            attempted: None,
            angles: *angles,
        },
        records,
    )
}
