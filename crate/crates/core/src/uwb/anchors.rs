use serde::{Deserialize, Serialize};

use super::UwbError;
use crate::geom::Vec2;
use crate::sim::AnchorLayout;

/// Four fixed anchors (x, y, z) and the height of the tag on the robot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet {
    anchors: [[f64; 3]; 4],
    tag_height: f64,
}

impl AnchorSet {
    pub fn new(anchors: [[f64; 3]; 4], tag_height: f64) -> Result<Self, UwbError> {
        if anchors.iter().flatten().any(|v| !v.is_finite()) || !tag_height.is_finite() {
            return Err(UwbError::NonFinite("anchor position"));
        }
        for i in 0..4 {
            for j in i + 1..4 {
                let d: f64 = (0..3).map(|k| (anchors[i][k] - anchors[j][k]).powi(2)).sum();
                if d.sqrt() < 1e-9 {
                    return Err(UwbError::CoincidentAnchors { i, j });
                }
            }
        }
        // collinear when every anchor is within 1e-9 of the line through the farthest pair
        let p: Vec<Vec2> = anchors.iter().map(|a| Vec2::new(a[0], a[1])).collect();
        let mut far = (0, 1, 0.0);
        for i in 0..4 {
            for j in i + 1..4 {
                let d = p[i].distance(p[j]);
                if d > far.2 {
                    far = (i, j, d);
                }
            }
        }
        let (a, b, len) = far;
        if len < 1e-9 || p.iter().all(|q| ((p[b] - p[a]).cross(*q - p[a]) / len).abs() < 1e-9) {
            return Err(UwbError::CollinearAnchors);
        }
        Ok(Self { anchors, tag_height })
    }

    pub fn from_layout(layout: &AnchorLayout) -> Result<Self, UwbError> {
        Self::new(layout.positions, layout.tag_height)
    }

    pub fn positions(&self) -> &[[f64; 3]; 4] {
        &self.anchors
    }

    pub fn tag_height(&self) -> f64 {
        self.tag_height
    }

    pub fn xy(&self, i: usize) -> Vec2 {
        Vec2::new(self.anchors[i][0], self.anchors[i][1])
    }

    /// 3D distance from the tag at planar position `p` to anchor `i`.
    pub fn distance(&self, i: usize, p: Vec2) -> f64 {
        let a = self.anchors[i];
        let dz = self.tag_height - a[2];
        ((p.x - a[0]).powi(2) + (p.y - a[1]).powi(2) + dz * dz).sqrt()
    }
}
