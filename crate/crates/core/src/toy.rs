//! Classical toy models that reproduce Bell statistics by selection alone.
//!
//! Both models start from the same raw material: settings and outcomes that
//! are nothing but independent fair coin tosses. Retention keeps a tuple with
//! probability equal to a target quantum distribution; the hopper sorter
//! discards nothing and instead routes every tuple to one of four bins using
//! the posterior over initial Bell states.

use serde::Serialize;

use crate::ensemble::{config_digest, Ensemble, EnsembleMeta, Geometry, RunRecord, SelLabel};
use crate::error::{Error, Result};
use crate::quantum::{
    bell_state, joint_probabilities, validate_weights, AngleConfig, BellLabel, JointDist,
};
use crate::rng::{sample_index, StreamFactory};
use rand::Rng;

/// Retention rule used by [`charlie_retention`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetentionRule {
    /// Keep (a,A,b,B) with probability P(A,B|a,b) of the target Bell state.
    Qm,
    /// Keep only perfect matches (A = B).
    PerfectMatch,
}

/// Output of the retention toy model.
#[derive(Debug, Clone)]
pub struct RetentionResult {
    /// Retained runs, original run ids preserved.
    pub retained: Ensemble,
    pub attempted: u64,
    pub retained_count: u64,
}

/// Output of the hopper toy model: four bins, nothing discarded.
#[derive(Debug, Clone)]
pub struct HopperResult {
    pub hoppers: [Ensemble; 4],
    pub attempted: u64,
}

impl HopperResult {
    /// All records in run order, with their hopper label attached. This is
    /// the labeled super-ensemble the bias tests operate on.
    pub fn pooled(&self) -> Ensemble {
        let mut records: Vec<RunRecord> = self
            .hoppers
            .iter()
            .flat_map(|h| h.records().iter().copied())
            .collect();
        records.sort_by_key(|r| r.run);
        let meta = EnsembleMeta {
            shots: records.len() as u64,
            attempted: None,
            config_digest: format!("{}-pooled", self.hoppers[0].meta().config_digest),
            ..self.hoppers[0].meta().clone()
        };
        Ensemble::from_parts(meta, records).expect("hopper union is a valid ensemble")
    }
}

fn require_shots(shots: u64) -> Result<()> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct RetentionDigest<'a> {
    protocol: &'static str,
    target: BellLabel,
    rule: RetentionRule,
    angles: &'a AngleConfig,
    shots: u64,
    seed: u64,
}

/// Charlie's retention algorithm: settings and outcomes are i.i.d. fair
/// bits; a tuple is retained with probability given by the rule. Under the
/// `Qm` rule the retained subset reproduces the target state's Bell-test
/// statistics.
pub fn charlie_retention(
    shots: u64,
    seed: u64,
    target_state: BellLabel,
    angles: &AngleConfig,
    rule: RetentionRule,
) -> Result<RetentionResult> {
    angles.validate()?;
    require_shots(shots)?;
    let target = bell_state(target_state);
    let mut acceptance = [[JointDist::new([0.25; 4])?; 2]; 2];
    for a in 0..2u8 {
        for b in 0..2u8 {
            acceptance[a as usize][b as usize] =
                joint_probabilities(&target, angles.alice(a), angles.bob(b))?;
        }
    }
    let factory = StreamFactory::new(seed);
    let mut records = Vec::new();
    for run in 0..shots {
        let mut rng = factory.stream(run);
        // Tuple order (a, A, b, B), then the acceptance draw.
        let a = rng.gen::<bool>() as u8;
        let outcome_a = rng.gen::<bool>() as u8;
        let b = rng.gen::<bool>() as u8;
        let outcome_b = rng.gen::<bool>() as u8;
        let p_keep = match rule {
            RetentionRule::Qm => acceptance[a as usize][b as usize].get(outcome_a, outcome_b),
            RetentionRule::PerfectMatch => {
                if outcome_a == outcome_b {
                    1.0
                } else {
                    0.0
                }
            }
        };
        if rng.gen::<f64>() < p_keep {
            records.push(RunRecord {
                run,
                a,
                b,
                outcome_a,
                outcome_b,
                sel: None,
                geometry: Geometry::V,
            });
        }
    }
    let digest = config_digest(&RetentionDigest {
        protocol: "retention",
        target: target_state,
        rule,
        angles,
        shots,
        seed,
    });
    let retained_count = records.len() as u64;
    let retained = Ensemble::from_parts(
        EnsembleMeta {
            seed,
            config_digest: digest,
            shots: retained_count,
            attempted: Some(shots),
            angles: *angles,
        },
        records,
    )?;
    Ok(RetentionResult {
        retained,
        attempted: shots,
        retained_count,
    })
}

/// Posterior over the four Bell states given a tuple (a,b,A,B), under a
/// uniform prior. Because the four Bell distributions sum cellwise to the
/// flat distribution, the posterior equals the likelihood.
pub fn inverse_probabilities(
    a: u8,
    b: u8,
    outcome_a: u8,
    outcome_b: u8,
    angles: &AngleConfig,
) -> Result<[f64; 4]> {
    let post = inverse_probabilities_weighted(a, b, outcome_a, outcome_b, angles, &[0.25; 4])?;
    Ok(post)
}

/// Posterior over the four Bell states under an arbitrary prior. Errors on
/// a zero-probability row, which can only arise with degenerate priors.
pub fn inverse_probabilities_weighted(
    a: u8,
    b: u8,
    outcome_a: u8,
    outcome_b: u8,
    angles: &AngleConfig,
    prior: &[f64; 4],
) -> Result<[f64; 4]> {
    angles.validate()?;
    validate_weights(prior)?;
    for (name, bit) in [("a", a), ("b", b), ("A", outcome_a), ("B", outcome_b)] {
        if bit > 1 {
            return Err(Error::InvalidArgument(format!(
                "bit {name} must be 0 or 1, got {bit}"
            )));
        }
    }
    let alpha = angles.alice(a);
    let beta = angles.bob(b);
    let mut post = [0.0; 4];
    for label in BellLabel::ALL {
        let likelihood = joint_probabilities(&bell_state(label), alpha, beta)?
            .get(outcome_a, outcome_b);
        post[label.index()] = prior[label.index()] * likelihood;
    }
    let total: f64 = post.iter().sum();
    if total <= 0.0 {
        // Impossible under a uniform prior: the Bell mixture is strictly
        // positive on every cell.
        assert!(
            prior.contains(&0.0),
            "zero-probability row under a strictly positive prior"
        );
        return Err(Error::InvalidWeights(
            "prior assigns zero mass to every state consistent with the tuple".into(),
        ));
    }
    for p in &mut post {
        *p /= total;
    }
    Ok(post)
}

#[derive(Serialize)]
struct HopperDigest<'a> {
    protocol: &'static str,
    prior: [f64; 4],
    angles: &'a AngleConfig,
    shots: u64,
    seed: u64,
}

/// Sort uniformly generated tuples into four hoppers using the posterior
/// over initial Bell states. Discards nothing; hopper i's conditional
/// frequencies converge to the Bell-test statistics of state C_i.
pub fn charlie_hoppers(shots: u64, seed: u64, angles: &AngleConfig) -> Result<HopperResult> {
    charlie_hoppers_weighted(shots, seed, angles, &[0.25; 4])
}

/// Hopper sorter with an arbitrary prior over the four states.
pub fn charlie_hoppers_weighted(
    shots: u64,
    seed: u64,
    angles: &AngleConfig,
    prior: &[f64; 4],
) -> Result<HopperResult> {
    angles.validate()?;
    validate_weights(prior)?;
    require_shots(shots)?;
    // Only 16 distinct tuples; precompute every posterior.
    let mut table = [[0.0; 4]; 16];
    for (idx, entry) in table.iter_mut().enumerate() {
        let a = ((idx >> 3) & 1) as u8;
        let outcome_a = ((idx >> 2) & 1) as u8;
        let b = ((idx >> 1) & 1) as u8;
        let outcome_b = (idx & 1) as u8;
        *entry = inverse_probabilities_weighted(a, b, outcome_a, outcome_b, angles, prior)?;
    }
    let factory = StreamFactory::new(seed);
    let mut bins: [Vec<RunRecord>; 4] = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for run in 0..shots {
        let mut rng = factory.stream(run);
        let a = rng.gen::<bool>() as u8;
        let outcome_a = rng.gen::<bool>() as u8;
        let b = rng.gen::<bool>() as u8;
        let outcome_b = rng.gen::<bool>() as u8;
        let idx = ((a as usize) << 3) | ((outcome_a as usize) << 2) | ((b as usize) << 1)
            | outcome_b as usize;
        let hopper = sample_index(&table[idx], rng.gen::<f64>());
        bins[hopper].push(RunRecord {
            run,
            a,
            b,
            outcome_a,
            outcome_b,
            sel: Some(SelLabel::state(hopper).expect("index in range")),
            geometry: Geometry::V,
        });
    }
    let digest = config_digest(&HopperDigest {
        protocol: "hoppers",
        prior: *prior,
        angles,
        shots,
        seed,
    });
    let mut hoppers = Vec::with_capacity(4);
    for bin in bins {
        let meta = EnsembleMeta {
            seed,
            config_digest: digest.clone(),
            shots: bin.len() as u64,
            attempted: Some(shots),
            angles: *angles,
        };
        hoppers.push(Ensemble::from_parts(meta, bin)?);
    }
    let hoppers: [Ensemble; 4] = hoppers.try_into().expect("four hoppers");
    Ok(HopperResult {
        hoppers,
        attempted: shots,
    })
}
