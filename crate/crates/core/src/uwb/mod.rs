//! Simulated four-anchor UWB locating: noisy range generation, per-anchor
//! scalar Kalman smoothing and a damped Gauss-Newton 2D position solve.

mod anchors;
mod kalman;
mod localizer;
mod ranging;
mod solver;

use thiserror::Error;

pub use anchors::AnchorSet;
pub use kalman::{kalman_update, KalmanState, SIGMA_M2, SIGMA_P2};
pub use localizer::{localize, Fix, Localizer, LocalizerConfig};
pub use ranging::{read_ranging_log, simulate_ranges, write_ranging_log, RangeMeasurement, RangingNoiseModel, RangingRecord};
pub use solver::{gauss_newton_solve, GnOptions, GnSolution};

#[derive(Debug, Error, PartialEq)]
pub enum UwbError {
    #[error("anchors {i} and {j} coincide")]
    CoincidentAnchors { i: usize, j: usize },
    #[error("anchors are collinear in the x-y plane")]
    CollinearAnchors,
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("only {0} ranges available, at least 3 are required")]
    TooFewRanges(usize),
    #[error("normal equations are singular even with damping")]
    DegenerateGeometry,
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("ranging log line {line}: {message}")]
    Log { line: usize, message: String },
}
