//! The 62-component agent observation: 60 sector-minimum lidar ranges followed
//! by the distance and relative bearing to the current goal.
//!
//! Sector `k` covers robot-relative bearings `[2πk/60, 2π(k+1)/60)`, so
//! sector 0 starts at the robot heading and sectors advance counter-clockwise.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{wrap_angle, Vec2};

pub const N_SECTORS: usize = 60;
pub const OBS_DIM: usize = N_SECTORS + 2;

#[derive(Debug, Error, PartialEq)]
pub enum PerceptionError {
    #[error("{len} range readings cannot be split into {n_sectors} equal sectors")]
    LengthMismatch { len: usize, n_sectors: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObservationConfig {
    pub n_sectors: usize,
    pub max_range: f64,
    /// Goal distance normalizer, meters.
    pub d_norm: f64,
    /// Readings below this are spurious returns and ignored by the pooling.
    pub outlier_floor: f64,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        Self {
            n_sectors: N_SECTORS,
            max_range: 3.5,
            d_norm: 5.0,
            outlier_floor: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Sector minima in meters.
    pub sectors: Vec<f64>,
    pub goal_distance: f64,
    /// Bearing to the goal relative to the robot heading, (−π, π].
    pub goal_heading: f64,
}

impl Observation {
    /// Components in physical units, in the fixed order.
    pub fn raw(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.sectors.len() + 2);
        v.extend_from_slice(&self.sectors);
        v.push(self.goal_distance);
        v.push(self.goal_heading);
        v
    }

    /// Network input: sectors / max_range, distance / d_norm, heading / π.
    pub fn normalized(&self, cfg: &ObservationConfig) -> [f64; OBS_DIM] {
        debug_assert_eq!(self.sectors.len(), N_SECTORS);
        let mut out = [0.0; OBS_DIM];
        for (o, s) in out.iter_mut().zip(&self.sectors) {
            *o = s / cfg.max_range;
        }
        out[N_SECTORS] = self.goal_distance / cfg.d_norm;
        out[N_SECTORS + 1] = self.goal_heading / std::f64::consts::PI;
        out
    }
}

/// Per-sector minimum of the readings at or above `outlier_floor`. A sector
/// with nothing above the floor reports its raw minimum.
pub fn sector_min_pool(
    ranges: &[f64],
    n_sectors: usize,
    outlier_floor: f64,
) -> Result<Vec<f64>, PerceptionError> {
    if n_sectors == 0 || ranges.is_empty() || ranges.len() % n_sectors != 0 {
        return Err(PerceptionError::LengthMismatch {
            len: ranges.len(),
            n_sectors,
        });
    }
    let width = ranges.len() / n_sectors;
    Ok(ranges
        .chunks_exact(width)
        .map(|sector| {
            let valid = sector
                .iter()
                .copied()
                .filter(|&r| r >= outlier_floor)
                .fold(f64::INFINITY, f64::min);
            if valid.is_finite() {
                valid
            } else {
                sector.iter().copied().fold(f64::INFINITY, f64::min)
            }
        })
        .collect())
}

/// Distance and robot-relative bearing to `goal`. The bearing is 0 at the goal itself.
pub fn goal_polar(x: f64, y: f64, theta: f64, goal: Vec2) -> (f64, f64) {
    let dx = goal.x - x;
    let dy = goal.y - y;
    let distance = dx.hypot(dy);
    if distance == 0.0 {
        return (0.0, 0.0);
    }
    (distance, wrap_angle(dy.atan2(dx) - theta))
}

/// Pools `scan` into sectors and appends the goal polar coordinates computed
/// from `pose_estimate` = (x, y, θ).
pub fn build_observation(
    scan: &[f64],
    pose_estimate: (f64, f64, f64),
    goal: Vec2,
    cfg: &ObservationConfig,
) -> Result<Observation, PerceptionError> {
    let sectors = sector_min_pool(scan, cfg.n_sectors, cfg.outlier_floor)?;
    let (x, y, theta) = pose_estimate;
    let (goal_distance, goal_heading) = goal_polar(x, y, theta, goal);
    Ok(Observation {
        sectors,
        goal_distance,
        goal_heading,
    })
}
