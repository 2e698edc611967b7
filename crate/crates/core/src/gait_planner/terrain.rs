use serde::{Deserialize, Serialize};

use crate::model::Point;

/// Penetration of a point into the nearest stair face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceContact {
    /// Distance inside the face, m (non-negative).
    pub depth: f64,
    /// Outward unit normal of the face.
    pub normal: Point,
}

impl SurfaceContact {
    /// Tread contacts bear weight; riser contacts push horizontally.
    pub fn is_tread(&self) -> bool {
        self.normal.y > 0.0
    }
}

/// Piecewise-flat ground: `base` before the first riser, one `rise` higher
/// after each riser x position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Staircase {
    pub base: f64,
    pub rise: f64,
    pub risers: Vec<f64>,
}

impl Staircase {
    pub fn flat(height: f64) -> Self {
        Self {
            base: height,
            rise: 0.0,
            risers: Vec::new(),
        }
    }

    pub fn height(&self, x: f64) -> f64 {
        let n = self.risers.iter().filter(|&&r| x >= r).count();
        self.base + self.rise * n as f64
    }

    /// Contact of a point at or below the tread height under it. A point that
    /// is closer to the riser face it crossed than to the tread top is pushed
    /// back out through the riser.
    pub fn contact(&self, p: Point) -> Option<SurfaceContact> {
        let top = self.height(p.x);
        let depth = top - p.y;
        if !(depth >= 0.0) {
            return None;
        }
        let riser = self.risers.iter().copied().filter(|r| *r <= p.x).reduce(f64::max);
        if let Some(r) = riser {
            let inset = p.x - r;
            if p.y > top - self.rise && inset < depth {
                return Some(SurfaceContact {
                    depth: inset,
                    normal: Point::new(-1.0, 0.0),
                });
            }
        }
        Some(SurfaceContact {
            depth,
            normal: Point::new(0.0, 1.0),
        })
    }
}
