//! Closed-loop evaluation of planners on scenario files: trajectory logs,
//! the success/time/smoothness metrics, comparison tables and a decision
//! throughput benchmark.

mod bench;
mod episode;
mod metrics;
mod planner;

use thiserror::Error;

pub use bench::{random_observations, throughput_bench, ThroughputReport};
pub use episode::{
    run_episode, run_many, Decision, EpisodeStepper, EvalConfig, EventKind, Localization, TrajectoryEvent, TrajectoryLog, TrajectoryRecord, TrajectorySample,
    Step, UwbFixSample,
};
pub use metrics::{compare, compute_metrics, ComparisonRow, ComparisonTable, MetricsReport};
pub use planner::{ConstantPlanner, DwaPlanner, ExternalPlanner, Planner, PlannerInput, RlPlanner};

use crate::uwb::UwbError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("planner failed: {0}")]
    Planner(String),
    #[error(transparent)]
    Uwb(#[from] UwbError),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("no trajectory logs given")]
    NoLogs,
    #[error("logs mix scenarios {0:?} and {1:?}")]
    MixedScenarios(String, String),
    #[error("a comparison needs at least 2 reports, got {0}")]
    Arity(usize),
    #[error("trajectory log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A failed episode with everything recorded up to the failure.
#[derive(Debug, Error)]
#[error("{source}")]
pub struct EpisodeAborted {
    pub partial: TrajectoryLog,
    #[source]
    pub source: EvalError,
}
