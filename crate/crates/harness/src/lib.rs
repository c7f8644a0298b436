//! Experiment harness for the warm-start actor-critic lab: configuration,
//! seeded parallel runs, record files, canned figure sweeps, bound
//! evaluation and offline error decomposition.

pub mod bounds_cmd;
pub mod cli;
pub mod config;
pub mod decompose;
pub mod error;
pub mod experiment;
pub mod figures;
pub mod manifest;
pub mod records;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, ExperimentOutput};
pub use figures::{figure_configs, reproduce_figure, FigureName};
pub use manifest::{write_experiment, Manifest};
pub use records::{summarize, RunRecord, SummaryRow};
