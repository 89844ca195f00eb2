//! Configuration, orchestration of runs and sweeps, field comparison and
//! run manifests.

pub mod compare;
pub mod config;
pub mod manifest;
pub mod phase;
pub mod run;
pub mod sweep;

pub use compare::{compare_fields, compare_files, CompareMetrics};
pub use config::{load_config, parse_config, parse_with_overrides, RunConfig, Solver, SweepMode};
pub use manifest::{sha256_hex, Manifest};
pub use phase::SampledPhase;
pub use run::{run, Prepared, RunOutcome};
pub use sweep::{epsilon_sweep, fit_slope, SlopeFit, SweepResult};
