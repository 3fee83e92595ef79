//! Experiment harness for the safeslope library: configuration files, seeded
//! multi-trial execution, aggregation, and CSV output. The `safeslope` binary
//! is a thin wrapper over this crate.

pub mod config;
pub mod experiment;
pub mod output;

pub use config::{ExperimentConfig, Fidelity, InitialSetPolicy};
pub use experiment::{
    analyze, generate_initial_safe_sets, ground_truth, run_experiment, run_experiment_with,
    trial_seed, ExperimentResult,
};
