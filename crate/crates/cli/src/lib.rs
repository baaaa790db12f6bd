//! Experiment runner behind the `rmt-lab` binary: JSON configs, seeded
//! pipelines, manifests and the canned suites.

pub mod config;
pub mod manifest;
pub mod run;
pub mod suite;

pub use config::{ConfigInvalid, EnsembleConfig, ExperimentConfig, Kind, Params, PotentialKind, SCHEMA_VERSION};
pub use manifest::{config_digest, Check, RunManifest};
pub use run::{run, RunError};
pub use suite::{experiments, run_suite, SuiteName, SuiteReport};

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const THRESHOLD_FAIL: i32 = 1;
    pub const CONFIG_ERROR: i32 = 2;
    pub const RUNTIME_ERROR: i32 = 3;
}
