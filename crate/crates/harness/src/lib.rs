//! Experiment driver: runs independent agents per variant, evaluates them
//! periodically with frozen policies, and writes curves, discovery epochs
//! and summary statistics.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod stats;
pub mod summary;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, run_experiment_with, Evaluation, ResultsBundle, RunResult};
pub use output::{read_data, read_summary, summarize_dir, write_outputs};
pub use summary::{summarize, ExperimentData, SummaryStats};
