//! Simulation and diagnosis of Bell-type correlations as selection effects.
//!
//! The crate has five layers:
//!
//! * [`quantum`] — exact Born-rule engine for two- and four-qubit states,
//!   including the Bell-state measurement behind entanglement swapping;
//! * [`experiments`] — seeded ensemble generators for V-shaped and W-shaped
//!   Bell experiments;
//! * [`toy`] — classical toy models (probabilistic retention and the
//!   four-hopper sorter) that rebuild the same statistics from coin flips;
//! * [`analysis`] — correlation/CHSH estimation, the minimal selection-bias
//!   test, no-signalling and factorizability checks;
//! * [`forks`] — non-quantum demonstrations: collider conditioning, digit
//!   parity, and range restriction.
//!
//! Ensembles are deterministic functions of (config, shots, seed) and
//! serialize to JSONL or CSV via [`ensemble`].

pub mod analysis;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod forks;
pub mod quantum;
pub mod rng;
pub mod toy;

pub use error::{Error, Result};
