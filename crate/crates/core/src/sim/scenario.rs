//! Scenario files.
//!
//! A scenario is a TOML document with the sections `[map]`, `[start]`,
//! `[goals]`, `[[obstacles]]`, `[limits]` and an optional `[anchors]` block.
//! Lengths are meters, angles radians, times seconds.
//!
//! ```toml
//! name = "corridor"
//!
//! [map]
//! min = [-1.0, -1.5]          # bounds, lower-left corner
//! max = [5.0, 1.5]            # bounds, upper-right corner
//! boundary_walls = true       # add the four bounding walls as segments
//! walls = [[2.0, -1.5, 2.0, -0.5]]   # x1, y1, x2, y2
//!
//! [start]
//! x = 0.0
//! y = 0.0
//! theta = 0.0
//!
//! [goals]
//! points = [[4.0, 0.0]]       # visited in order
//!
//! [[obstacles]]
//! shape = [[0.0, -0.4, 0.0, 0.4]]            # segments in the local frame
//! keyframes = [[0.0, 2.5, 1.0], [8.0, 2.5, 0.0]]  # t, x, y
//!
//! [limits]
//! t_max = 180.0
//! goal_radius = 0.2
//!
//! [anchors]                   # optional, defaults to the bounds corners
//! positions = [[-1.0, -1.5, 1.5], [5.0, -1.5, 1.6], [5.0, 1.5, 1.7], [-1.0, 1.5, 1.8]]
//! tag_height = 0.2
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Segment, Vec2};

use super::map::{min_clearance, Bounds, WorldMap};
use super::obstacle::{Keyframe, ObstacleScript};
use super::world::DEFAULT_ROBOT_RADIUS;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StartPose {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub theta: f64,
}

impl StartPose {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// UWB anchor positions (x, y, z) and the tag mounting height.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorLayout {
    pub positions: [[f64; 3]; 4],
    pub tag_height: f64,
}

impl AnchorLayout {
    /// Anchors at the bounds corners at heights 1.5, 1.6, 1.7 and 1.8 m.
    pub fn corners_of(bounds: &Bounds, tag_height: f64) -> Self {
        let c = bounds.corners();
        let mut positions = [[0.0; 3]; 4];
        for (i, p) in c.iter().enumerate() {
            positions[i] = [p.x, p.y, 1.5 + 0.1 * i as f64];
        }
        Self {
            positions,
            tag_height,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub map: WorldMap,
    pub start: StartPose,
    pub goals: Vec<Vec2>,
    pub obstacles: Vec<ObstacleScript>,
    pub t_max: f64,
    pub goal_radius: f64,
    pub anchors: AnchorLayout,
}

impl ScenarioSpec {
    pub fn validate(&self, robot_radius: f64) -> Result<(), ScenarioError> {
        let invalid = |msg: String| Err(ScenarioError::Invalid(msg));
        self.map.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        if !(self.t_max > 0.0) {
            return invalid(format!("t_max must be > 0 (got {})", self.t_max));
        }
        if !(self.goal_radius > 0.0) {
            return invalid(format!("goal_radius must be > 0 (got {})", self.goal_radius));
        }
        if self.goals.is_empty() {
            return invalid("at least one goal is required".into());
        }
        let start = self.start.position();
        if !self.map.bounds.contains(start) {
            return invalid(format!("start {start:?} lies outside the map bounds"));
        }
        if min_clearance(&self.map, &[], start) <= robot_radius {
            return invalid(format!("start {start:?} lies inside a wall's collision envelope"));
        }
        for (i, g) in self.goals.iter().enumerate() {
            if !self.map.bounds.contains(*g) {
                return invalid(format!("goal {i} {g:?} lies outside the map bounds"));
            }
            if min_clearance(&self.map, &[], *g) <= robot_radius {
                return invalid(format!("goal {i} {g:?} lies inside a wall's collision envelope"));
            }
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            o.validate()
                .map_err(|e| ScenarioError::Invalid(format!("obstacle {i}: {e}")))?;
        }
        if !(self.anchors.tag_height.is_finite()) {
            return invalid("anchor tag_height must be finite".into());
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    #[allow(dead_code)]
    description: Option<String>,
    map: RawMap,
    start: StartPose,
    goals: RawGoals,
    #[serde(default)]
    obstacles: Vec<RawObstacle>,
    #[serde(default)]
    limits: RawLimits,
    #[serde(default)]
    anchors: Option<AnchorLayout>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    min: [f64; 2],
    max: [f64; 2],
    #[serde(default)]
    boundary_walls: bool,
    #[serde(default)]
    walls: Vec<[f64; 4]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGoals {
    points: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObstacle {
    shape: Vec<[f64; 4]>,
    keyframes: Vec<[f64; 3]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLimits {
    #[serde(default = "default_t_max")]
    t_max: f64,
    #[serde(default = "default_goal_radius")]
    goal_radius: f64,
}

impl Default for RawLimits {
    fn default() -> Self {
        Self {
            t_max: default_t_max(),
            goal_radius: default_goal_radius(),
        }
    }
}

fn default_t_max() -> f64 {
    180.0
}

fn default_goal_radius() -> f64 {
    0.2
}

const DEFAULT_TAG_HEIGHT: f64 = 0.2;

fn segment(c: &[f64; 4]) -> Segment {
    Segment::from_coords(c[0], c[1], c[2], c[3])
}

/// Parses and validates a scenario document.
pub fn load_scenario(text: &str) -> Result<ScenarioSpec, ScenarioError> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        ScenarioError::Parse {
            line,
            message: e.message().to_string(),
        }
    })?;

    let bounds = Bounds::new(raw.map.min.into_vec2(), raw.map.max.into_vec2());
    let mut segments: Vec<Segment> = raw.map.walls.iter().map(segment).collect();
    if raw.map.boundary_walls {
        segments.extend(bounds.walls());
    }
    let obstacles = raw
        .obstacles
        .iter()
        .map(|o| ObstacleScript {
            shape: o.shape.iter().map(segment).collect(),
            keyframes: o
                .keyframes
                .iter()
                .map(|k| Keyframe { t: k[0], x: k[1], y: k[2] })
                .collect(),
        })
        .collect();
    let anchors = raw
        .anchors
        .unwrap_or_else(|| AnchorLayout::corners_of(&bounds, DEFAULT_TAG_HEIGHT));
    let spec = ScenarioSpec {
        name: raw.name.unwrap_or_else(|| "unnamed".into()),
        map: WorldMap { segments, bounds },
        start: raw.start,
        goals: raw.goals.points.iter().map(|p| p.into_vec2()).collect(),
        obstacles,
        t_max: raw.limits.t_max,
        goal_radius: raw.limits.goal_radius,
        anchors,
    };
    spec.validate(DEFAULT_ROBOT_RADIUS)?;
    Ok(spec)
}

trait IntoVec2 {
    fn into_vec2(self) -> Vec2;
}

impl IntoVec2 for [f64; 2] {
    fn into_vec2(self) -> Vec2 {
        Vec2::new(self[0], self[1])
    }
}
