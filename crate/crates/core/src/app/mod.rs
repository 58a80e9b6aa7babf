//! Scenario files, the end-to-end pipeline and evaluation metrics behind the
//! command-line tool.

mod metrics;
mod run;
mod scenario;

use std::path::Path;

use thiserror::Error;

use crate::planner::PlanError;
use crate::sim::{Outcome, SimError};
use crate::terrain::TerrainError;

pub use metrics::{compute_metrics, parse_episode_csv, Latency, MetricsReport};
pub use run::{ablate, plan_csv, run_once, start_state, write_outputs, AblationReport, RunResult, RunSummary};
pub use scenario::{Ablation, EpisodeSection, NoiseSection, ProfileSource, Scenario};

#[derive(Debug, Error)]
pub enum AppError {
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("profile ingestion: {0}")]
    Ingestion(TerrainError),
    #[error("terrain simplification: {0}")]
    Simplification(TerrainError),
    #[error("planning: {0}")]
    Planning(#[from] PlanError),
    #[error("simulation: {0}")]
    Simulation(#[from] SimError),
    #[error("episode log is empty")]
    EmptyLog,
    #[error("episode csv: {0}")]
    Csv(String),
}

impl AppError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), message: e.to_string() }
    }

    /// Process exit status for a failed stage.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Scenario(_) | Self::Io { .. } => 2,
            Self::Ingestion(_) => 3,
            Self::Simplification(_) => 4,
            Self::Planning(_) => 5,
            Self::Simulation(_) => 6,
            Self::EmptyLog | Self::Csv(_) => 7,
        }
    }
}

/// Exit status of a finished episode.
pub fn outcome_code(o: &Outcome) -> i32 {
    match o {
        Outcome::Completed => 0,
        Outcome::Aborted(_) => 5,
        Outcome::Failed(_) => 6,
        Outcome::Timeout => 8,
    }
}
