use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Segment, Vec2};

#[derive(Debug, Error, PartialEq)]
pub enum ObstacleError {
    #[error("obstacle script has no keyframes")]
    NoKeyframes,
    #[error("obstacle script has an empty shape")]
    EmptyShape,
    #[error("keyframe times must be strictly increasing (keyframe {index})")]
    NonIncreasingTimes { index: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// A rigid segment set moved along a piecewise-linear schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleScript {
    /// Geometry in the obstacle's local frame.
    pub shape: Vec<Segment>,
    pub keyframes: Vec<Keyframe>,
}

impl ObstacleScript {
    pub fn new(shape: Vec<Segment>, keyframes: Vec<Keyframe>) -> Result<Self, ObstacleError> {
        let script = Self { shape, keyframes };
        script.validate()?;
        Ok(script)
    }

    pub fn validate(&self) -> Result<(), ObstacleError> {
        if self.keyframes.is_empty() {
            return Err(ObstacleError::NoKeyframes);
        }
        if self.shape.is_empty() {
            return Err(ObstacleError::EmptyShape);
        }
        for (index, w) in self.keyframes.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(ObstacleError::NonIncreasingTimes { index: index + 1 });
            }
        }
        Ok(())
    }

    /// Offset of the local frame at time `t`; held at the first/last keyframe outside the schedule.
    pub fn position_at(&self, t: f64) -> Vec2 {
        let first = self.keyframes[0];
        if t <= first.t {
            return Vec2::new(first.x, first.y);
        }
        for w in self.keyframes.windows(2) {
            let (k0, k1) = (w[0], w[1]);
            if t <= k1.t {
                let s = (t - k0.t) / (k1.t - k0.t);
                return Vec2::new(k0.x + s * (k1.x - k0.x), k0.y + s * (k1.y - k0.y));
            }
        }
        let last = self.keyframes[self.keyframes.len() - 1];
        Vec2::new(last.x, last.y)
    }

    pub fn segments_at(&self, t: f64) -> impl Iterator<Item = Segment> + '_ {
        let offset = self.position_at(t);
        self.shape.iter().map(move |s| s.translated(offset))
    }
}

/// World-frame geometry of every scripted obstacle at time `t`.
pub fn advance_obstacles(scripts: &[ObstacleScript], t: f64) -> Vec<Segment> {
    scripts.iter().flat_map(|s| s.segments_at(t)).collect()
}
