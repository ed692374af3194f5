use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Segment, Vec2};

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("segment {index} has zero length")]
    DegenerateSegment { index: usize },
    #[error("segment {index} leaves the map bounds")]
    SegmentOutOfBounds { index: usize },
    #[error("bounds are empty: min {min:?} max {max:?}")]
    EmptyBounds { min: Vec2, max: Vec2 },
}

/// Axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bounds {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn corners(&self) -> [Vec2; 4] {
        [
            self.min,
            Vec2::new(self.max.x, self.min.y),
            self.max,
            Vec2::new(self.min.x, self.max.y),
        ]
    }

    /// The four boundary edges as wall segments.
    pub fn walls(&self) -> Vec<Segment> {
        let c = self.corners();
        (0..4).map(|i| Segment::new(c[i], c[(i + 1) % 4])).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldMap {
    pub segments: Vec<Segment>,
    pub bounds: Bounds,
}

impl WorldMap {
    pub fn new(segments: Vec<Segment>, bounds: Bounds) -> Result<Self, MapError> {
        let map = Self { segments, bounds };
        map.validate()?;
        Ok(map)
    }

    pub fn empty(bounds: Bounds) -> Self {
        Self {
            segments: Vec::new(),
            bounds,
        }
    }

    /// A closed rectangular room with no interior obstacles.
    pub fn room(bounds: Bounds) -> Self {
        Self {
            segments: bounds.walls(),
            bounds,
        }
    }

    pub fn validate(&self) -> Result<(), MapError> {
        let b = &self.bounds;
        if !(b.min.x < b.max.x && b.min.y < b.max.y) {
            return Err(MapError::EmptyBounds { min: b.min, max: b.max });
        }
        // boundary walls sit exactly on the rectangle, allow rounding slack
        let slack = Bounds::new(b.min - Vec2::new(1e-9, 1e-9), b.max + Vec2::new(1e-9, 1e-9));
        for (index, s) in self.segments.iter().enumerate() {
            if !(s.length() > 0.0) {
                return Err(MapError::DegenerateSegment { index });
            }
            if !slack.contains(s.a) || !slack.contains(s.b) {
                return Err(MapError::SegmentOutOfBounds { index });
            }
        }
        Ok(())
    }
}

/// Distance from `p` to the nearest static or moving segment (∞ when none).
pub fn min_clearance(map: &WorldMap, obstacles_at_t: &[Segment], p: Vec2) -> f64 {
    map.segments
        .iter()
        .chain(obstacles_at_t)
        .map(|s| s.distance_to(p))
        .fold(f64::INFINITY, f64::min)
}

/// True iff the disc of `robot_radius` around `pose` strictly overlaps a segment.
pub fn check_collision(
    map: &WorldMap,
    obstacles_at_t: &[Segment],
    pose: Vec2,
    robot_radius: f64,
) -> bool {
    min_clearance(map, obstacles_at_t, pose) < robot_radius
}
