//! Experiment harness around `eht-core`: JSON experiment configs, the
//! four subcommands (analyze, simulate, verify, sweep), and deterministic
//! CSV/JSON/NDJSON emission.

pub mod analyze;
pub mod config;
pub mod emit;
pub mod error;
pub mod simulate;
pub mod sweep;
pub mod verify;

pub use config::{prepare, ExperimentConfig, Prepared};
pub use error::CliError;
