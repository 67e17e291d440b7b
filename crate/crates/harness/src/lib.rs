//! Orchestration: seeded data, training runs, the experiments and their
//! reports. The `escher` binary is a thin command-line layer over this crate.

pub mod config;
pub mod data;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod models;
pub mod patch;
pub mod report;

pub use config::{Preset, RunConfig};
pub use error::{HarnessError, Result};
pub use experiments::{ExperimentKind, ExperimentOutput, ExperimentSpec};
pub use report::Report;
