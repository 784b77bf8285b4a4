//! Running scenarios, writing logs and plots, and summarizing results.

pub mod config;
pub mod io;
pub mod metrics;
pub mod plot;
pub mod run;
pub mod verify;

pub use config::{ControllerOverrides, RunConfig};
pub use metrics::MetricsReport;
pub use run::{compare, run, simulate, Comparison, RunOutcome, RunRequest};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("simulation error: {0}")]
    Simulation(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
