//! Batch experiment runner for the `precgd` solvers: JSON configs in, CSV
//! traces and a JSON summary out.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod matrix_file;
pub mod metrics;
pub mod summary;
pub mod trace;

pub use config::{parse_config, ExperimentConfig};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, ExperimentOutput};
pub use summary::{emit_summary, ExperimentSummary};
