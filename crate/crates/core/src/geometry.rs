//! Oriented rectangles and polyline primitives.

use crate::math::Vec2;
use serde::{Deserialize, Serialize};

/// Rectangle footprint with its long axis along `heading`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Vec2,
    pub heading: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl OrientedBox {
    pub fn new(center: Vec2, heading: f64, half_length: f64, half_width: f64) -> Self {
        Self { center, heading, half_length, half_width }
    }

    pub fn axes(&self) -> [Vec2; 2] {
        let f = Vec2::from_angle(self.heading);
        [f, f.perp()]
    }

    pub fn corners(&self) -> [Vec2; 4] {
        let [f, l] = self.axes();
        let a = f * self.half_length;
        let b = l * self.half_width;
        let c = self.center;
        [c + a + b, c + a - b, c - a - b, c - a + b]
    }

    pub fn inflated(&self, margin: f64) -> Self {
        Self {
            half_length: self.half_length + margin,
            half_width: self.half_width + margin,
            ..*self
        }
    }

    /// Separating-axis overlap test. Touching boxes count as overlapping.
    pub fn overlaps(&self, other: &OrientedBox) -> bool {
        let ca = self.corners();
        let cb = other.corners();
        for axis in self.axes().into_iter().chain(other.axes()) {
            let (amin, amax) = project(&ca, axis);
            let (bmin, bmax) = project(&cb, axis);
            if amax < bmin || bmax < amin {
                return false;
            }
        }
        true
    }

    /// Minimum distance between the two boundaries, zero when overlapping.
    pub fn distance(&self, other: &OrientedBox) -> f64 {
        if self.overlaps(other) {
            return 0.0;
        }
        let ca = self.corners();
        let cb = other.corners();
        let mut best = f64::INFINITY;
        for i in 0..4 {
            let (a0, a1) = (ca[i], ca[(i + 1) % 4]);
            let (b0, b1) = (cb[i], cb[(i + 1) % 4]);
            for &p in &cb {
                best = best.min(point_segment_distance(p, a0, a1));
            }
            for &p in &ca {
                best = best.min(point_segment_distance(p, b0, b1));
            }
        }
        best
    }

    /// Transforms a world point into this box's local frame (x forward, y left).
    pub fn to_local(&self, p: Vec2) -> Vec2 {
        (p - self.center).rotate(-self.heading)
    }
}

fn project(corners: &[Vec2; 4], axis: Vec2) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in corners {
        let v = c.dot(axis);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Returns the closest point parameter `t in [0, 1]` on segment `a`-`b`.
pub fn closest_param(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let e = b - a;
    let len2 = e.dot(e);
    if len2 <= 0.0 {
        return 0.0;
    }
    ((p - a).dot(e) / len2).clamp(0.0, 1.0)
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let t = closest_param(p, a, b);
    p.distance(a.lerp(b, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::PI;

    #[test]
    fn overlapping_and_separated() {
        let a = OrientedBox::new(Vec2::new(0.0, 0.0), 0.0, 2.0, 1.0);
        let b = OrientedBox::new(Vec2::new(3.5, 0.0), 0.0, 2.0, 1.0);
        assert!(a.overlaps(&b));
        let c = OrientedBox::new(Vec2::new(4.5, 0.0), 0.0, 2.0, 1.0);
        assert!(!a.overlaps(&c));
        assert!((a.distance(&c) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rotated_boxes_use_all_axes() {
        // a diamond next to a square: axis-aligned extents overlap, true shapes do not
        let a = OrientedBox::new(Vec2::new(0.0, 0.0), 0.0, 1.0, 1.0);
        let b = OrientedBox::new(Vec2::new(2.3, 2.3), PI / 4.0, 1.0, 1.0);
        assert!(!a.overlaps(&b));
        assert!(a.distance(&b) > 0.0);
    }
}
