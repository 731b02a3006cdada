//! Monte Carlo experiment harness for channel-aware decentralized
//! sequential detection.
//!
//! This crate wraps the pure trial engine of `seqdet-core` with everything
//! an experiment needs on a real machine: TOML experiment configs with
//! strict validation, offline calibration of the quantities the fusion
//! center is assumed to know (local error probabilities, demodulator error
//! rates, mean inter-sampling intervals), parallel trial execution with
//! per-trial random substreams, operating-characteristic sweeps, threshold
//! calibration, KL information grids, an invariant verification suite, and
//! CSV persistence.
//!
//! Everything is deterministic: results are a pure function of
//! `(config, seed)`, independent of worker count and execution order.

pub mod analyze;
pub mod config;
pub mod csvfmt;
pub mod harness;
pub mod reproduce;
pub mod verify;

pub use config::{ConfigError, ExperimentConfig, ResolvedExperiment};
pub use harness::{run_monte_carlo, RunSummary, TrialRecord};
