//! Frenet frame over a [`DensePath`].
//!
//! The lateral direction is the vertex normal interpolated linearly along
//! each segment, which makes the world/Frenet maps exact inverses of each
//! other anywhere the normals do not fold over.

use serde::{Deserialize, Serialize};

use super::path::DensePath;
use super::ControlError;
use crate::geometry::point_segment_distance;
use crate::math::{atan2, cos, sin, sqrt, wrap_angle, Vec2};

/// Longitudinal and lateral state with first and second derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FrenetState {
    pub s: f64,
    pub s_d: f64,
    pub s_dd: f64,
    pub d: f64,
    pub d_d: f64,
    pub d_dd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Foot {
    segment: usize,
    t: f64,
    d: f64,
}

impl DensePath {
    fn seg(&self, i: usize) -> (Vec2, Vec2, Vec2, Vec2) {
        let p = self.points();
        let n = self.normals();
        (p[i], p[i + 1], n[i], n[i + 1])
    }

    fn solve_segment(&self, i: usize, p: Vec2) -> [Option<f64>; 2] {
        let (a, b, na, nb) = self.seg(i);
        let e = b - a;
        let dn = nb - na;
        let w0 = p - a;
        // cross(na + t dn, w0 - t e) = 0
        let qa = -dn.cross(e);
        let qb = dn.cross(w0) - na.cross(e);
        let qc = na.cross(w0);
        let scale = e.norm().max(1e-12);
        if qa.abs() < 1e-12 * scale {
            if qb.abs() < 1e-15 {
                return [None, None];
            }
            return [Some(-qc / qb), None];
        }
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            return [None, None];
        }
        let r = sqrt(disc);
        let q = -0.5 * (qb + if qb >= 0.0 { r } else { -r });
        let t1 = q / qa;
        let t2 = if q != 0.0 { qc / q } else { t1 };
        [Some(t1), Some(t2)]
    }

    fn frame(&self, i: usize, t: f64) -> (Vec2, Vec2) {
        let (a, b, na, nb) = self.seg(i);
        (a.lerp(b, t), na.lerp(nb, t).normalized())
    }

    fn foot(&self, p: Vec2) -> Option<Foot> {
        let segs = self.len() - 1;
        let pts = self.points();
        let mut best: Option<Foot> = None;
        const SLACK: f64 = 1e-9;
        for i in 0..segs {
            if let Some(b) = best {
                if point_segment_distance(p, pts[i], pts[i + 1]) > b.d.abs() + 2.0 {
                    continue;
                }
            }
            for t in self.solve_segment(i, p).into_iter().flatten() {
                let lo = if i == 0 { f64::NEG_INFINITY } else { -SLACK };
                let hi = if i == segs - 1 { f64::INFINITY } else { 1.0 + SLACK };
                if !(t >= lo && t <= hi) || !t.is_finite() {
                    continue;
                }
                let (base, n) = self.frame(i, t);
                let d = (p - base).dot(n);
                if best.is_none_or(|b| d.abs() < b.d.abs()) {
                    best = Some(Foot { segment: i, t, d });
                }
            }
        }
        best
    }

    fn s_of(&self, segment: usize, t: f64) -> f64 {
        let cum = self.line().cumulative();
        cum[segment] + t * (cum[segment + 1] - cum[segment])
    }

    fn locate_s(&self, s: f64) -> (usize, f64) {
        let i = self.line().segment_at(s);
        let cum = self.line().cumulative();
        (i, (s - cum[i]) / (cum[i + 1] - cum[i]))
    }

    /// Tangent heading of the path at arc length `s`.
    pub fn heading_at(&self, s: f64) -> f64 {
        let (i, _) = self.locate_s(s);
        let (a, b, _, _) = self.seg(i);
        (b - a).angle()
    }

    /// Projects a world point to `(s, d)` with `d` positive to the left.
    pub fn to_frenet(&self, p: Vec2) -> Result<(f64, f64), ControlError> {
        if !p.is_finite() {
            return Err(ControlError::NonFinite);
        }
        match self.foot(p) {
            Some(f) => Ok((self.s_of(f.segment, f.t), f.d)),
            None => {
                // normals fold over; fall back to the closest-point frame
                let pr = self.line().project(p);
                Ok((pr.s, pr.lateral))
            }
        }
    }

    /// Maps `(s, d)` back to world coordinates.
    pub fn to_world(&self, s: f64, d: f64) -> Vec2 {
        let (i, t) = self.locate_s(s);
        let (base, n) = self.frame(i, t);
        base + n * d
    }

    /// Projects a full pose, which must lie within two lane widths of the
    /// path. Velocity and acceleration are split along the
    /// path tangent and normal; curvature terms are neglected.
    pub fn project_pose(
        &self,
        position: Vec2,
        heading: f64,
        speed: f64,
        accel: f64,
    ) -> Result<FrenetState, ControlError> {
        let (s, d) = self.to_frenet(position)?;
        let limit = 2.0 * self.meta_at(s).width;
        if d.abs() > limit {
            return Err(ControlError::TooFarFromPath { distance: d.abs(), limit });
        }
        let rel = wrap_angle(heading - self.heading_at(s));
        let (c, sn) = (cos(rel), sin(rel));
        Ok(FrenetState { s, s_d: speed * c, s_dd: accel * c, d, d_d: speed * sn, d_dd: accel * sn })
    }

    /// World position, heading and speed of a Frenet state.
    pub fn state_to_world(&self, st: &FrenetState) -> (Vec2, f64, f64) {
        let pos = self.to_world(st.s, st.d);
        let base = self.heading_at(st.s);
        let speed = sqrt(st.s_d * st.s_d + st.d_d * st.d_d);
        let heading = if speed > 0.1 { wrap_angle(base + atan2(st.d_d, st.s_d)) } else { base };
        (pos, heading, speed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::path::PathPointMeta;
    use alloc::vec::Vec;

    fn meta() -> PathPointMeta {
        PathPointMeta { lane: 0, width: 3.5, lanes_left: 0, lanes_right: 0 }
    }

    fn arc() -> DensePath {
        let r = 30.0;
        let pts: Vec<Vec2> = (0..=40)
            .map(|i| {
                let a = i as f64 / 30.0;
                Vec2::new(r * sin(a), r - r * cos(a))
            })
            .collect();
        DensePath::from_points(pts, meta()).unwrap()
    }

    #[test]
    fn straight_path_axes() {
        let p = DensePath::from_points((0..=10).map(|i| Vec2::new(i as f64, 0.0)).collect(), meta()).unwrap();
        let (s, d) = p.to_frenet(Vec2::new(3.25, 1.5)).unwrap();
        assert!((s - 3.25).abs() < 1e-12 && (d - 1.5).abs() < 1e-12);
        let (s, d) = p.to_frenet(Vec2::new(4.0, -2.0)).unwrap();
        assert!((s - 4.0).abs() < 1e-12 && (d + 2.0).abs() < 1e-12);
    }

    #[test]
    fn round_trip_on_curve() {
        let p = arc();
        for k in 0..200 {
            let s = 0.5 + k as f64 * 0.19;
            for d in [-1.7, -0.3, 0.0, 0.8, 1.7] {
                let w = p.to_world(s, d);
                let (s2, d2) = p.to_frenet(w).unwrap();
                assert!(p.to_world(s2, d2).distance(w) < 1e-9);
                assert!((s2 - s).abs() < 1e-6, "s {s} vs {s2}");
                assert!((d2 - d).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn pose_velocity_split() {
        let p = DensePath::from_points((0..=10).map(|i| Vec2::new(i as f64, 0.0)).collect(), meta()).unwrap();
        let st = p.project_pose(Vec2::new(2.0, 0.5), 0.1, 10.0, 1.0).unwrap();
        assert!((st.s_d - 10.0 * cos(0.1)).abs() < 1e-12);
        assert!((st.d_d - 10.0 * sin(0.1)).abs() < 1e-12);
        let (_, h, v) = p.state_to_world(&st);
        assert!((h - 0.1).abs() < 1e-12 && (v - 10.0).abs() < 1e-12);
    }
}
