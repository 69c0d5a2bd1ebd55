//! Route densification onto lane centerlines.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ControlError;
use crate::math::{round, Vec2};
use crate::sim::lane::{LaneGraph, LaneId, Polyline};

/// Nominal spacing of dense path points (m).
pub const DENSE_SPACING: f64 = 1.0;
pub const MIN_SPACING: f64 = 0.5;
pub const MAX_SPACING: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPointMeta {
    pub lane: LaneId,
    pub width: f64,
    /// Same-direction lanes available to the left / right of `lane`.
    pub lanes_left: u8,
    pub lanes_right: u8,
}

/// Route resampled at ~1 m spacing along lane centerlines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensePath {
    line: Polyline,
    meta: Vec<PathPointMeta>,
    /// Unit normals at vertices (bisectors at interior points).
    normals: Vec<Vec2>,
}

impl DensePath {
    /// Builds a path directly from points with uniform metadata. Used for
    /// synthetic paths; [`densify`] is the route entry point.
    pub fn from_points(points: Vec<Vec2>, meta: PathPointMeta) -> Result<Self, ControlError> {
        let line = Polyline::new(points);
        if line.len() < 2 {
            return Err(ControlError::TooFewWaypoints(line.len()));
        }
        let n = line.len();
        Ok(Self::assemble(line, alloc::vec![meta; n]))
    }

    fn assemble(line: Polyline, meta: Vec<PathPointMeta>) -> Self {
        let pts = line.points();
        let n = pts.len();
        let seg_normal = |i: usize| (pts[i + 1] - pts[i]).normalized().perp();
        let mut normals = Vec::with_capacity(n);
        for i in 0..n {
            let nv = if i == 0 {
                seg_normal(0)
            } else if i == n - 1 {
                seg_normal(n - 2)
            } else {
                let b = seg_normal(i - 1) + seg_normal(i);
                if b.norm() < 1e-9 { seg_normal(i) } else { b.normalized() }
            };
            normals.push(nv);
        }
        Self { line, meta, normals }
    }

    pub fn line(&self) -> &Polyline {
        &self.line
    }

    pub fn points(&self) -> &[Vec2] {
        self.line.points()
    }

    pub fn len(&self) -> usize {
        self.line.len()
    }

    pub fn is_empty(&self) -> bool {
        self.line.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.line.length()
    }

    pub fn meta(&self) -> &[PathPointMeta] {
        &self.meta
    }

    pub(crate) fn normals(&self) -> &[Vec2] {
        &self.normals
    }

    /// Metadata of the point nearest to arc length `s`.
    pub fn meta_at(&self, s: f64) -> PathPointMeta {
        let i = self.line.segment_at(s);
        let cum = self.line.cumulative();
        let j = if i + 1 < cum.len() && (s - cum[i]) > (cum[i + 1] - s) { i + 1 } else { i };
        self.meta[j]
    }
}

/// Converts sparse route waypoints into a dense path following lane
/// centerlines, with adjacent-lane availability attached to every point.
pub fn densify(waypoints: &[Vec2], graph: &LaneGraph) -> Result<DensePath, ControlError> {
    if waypoints.len() < 2 {
        return Err(ControlError::TooFewWaypoints(waypoints.len()));
    }
    let mut located = Vec::with_capacity(waypoints.len());
    for (i, &w) in waypoints.iter().enumerate() {
        let m = graph.locate(w, None).ok_or(ControlError::OffLaneWaypoint(i))?;
        located.push(m);
    }

    // (lane, s_from, s_to) pieces
    let mut pieces: Vec<(LaneId, f64, f64)> = Vec::new();
    let mut push = |lane: LaneId, a: f64, b: f64| match pieces.last_mut() {
        Some(last) if last.0 == lane && (last.2 - a).abs() < 1e-9 => last.2 = b,
        _ => pieces.push((lane, a, b)),
    };
    for (i, pair) in located.windows(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        if a.lane == b.lane && b.s >= a.s {
            push(a.lane, a.s, b.s);
            continue;
        }
        let lanes = graph.successor_path(a.lane, b.lane).ok_or(ControlError::Unreachable(i + 1))?;
        for (k, &lane) in lanes.iter().enumerate() {
            let len = graph.lane(lane).map(|l| l.length()).unwrap_or(0.0);
            let from = if k == 0 { a.s } else { 0.0 };
            let to = if k == lanes.len() - 1 { b.s } else { len };
            push(lane, from, to);
        }
    }

    let total: f64 = pieces.iter().map(|p| p.2 - p.1).sum();
    if total < MIN_SPACING {
        return Err(ControlError::RouteTooShort(total));
    }
    let n = (round(total / DENSE_SPACING) as usize).max(1);
    let step = total / n as f64;

    let mut points = Vec::with_capacity(n + 1);
    let mut meta = Vec::with_capacity(n + 1);
    let mut piece = 0usize;
    let mut offset = 0.0; // arc length before the current piece
    for k in 0..=n {
        let g = if k == n { total } else { k as f64 * step };
        while piece + 1 < pieces.len() && g > offset + (pieces[piece].2 - pieces[piece].1) + 1e-9 {
            offset += pieces[piece].2 - pieces[piece].1;
            piece += 1;
        }
        let (lane_id, from, _) = pieces[piece];
        let lane = graph.lane(lane_id).ok_or(ControlError::Unreachable(0))?;
        points.push(lane.centerline.point_at(from + (g - offset)));
        meta.push(PathPointMeta {
            lane: lane_id,
            width: lane.width,
            lanes_left: graph.lanes_to_left(lane_id),
            lanes_right: graph.lanes_to_right(lane_id),
        });
    }

    let line = Polyline::new(points);
    if line.len() != meta.len() {
        return Err(ControlError::Discontinuous { index: 0, spacing: 0.0 });
    }
    let cum = line.cumulative();
    for (i, w) in cum.windows(2).enumerate() {
        let spacing = w[1] - w[0];
        if !(MIN_SPACING..=MAX_SPACING).contains(&spacing) {
            return Err(ControlError::Discontinuous { index: i + 1, spacing });
        }
    }
    Ok(DensePath::assemble(line, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::lane::Lane;
    use alloc::vec;

    fn graph() -> LaneGraph {
        let lane = Lane::new(0, (0..=10).map(|i| Vec2::new(i as f64 * 2.0, 0.0)).collect(), 3.5);
        LaneGraph::new(vec![lane]).unwrap()
    }

    #[test]
    fn straight_ten_metres_gives_eleven_points() {
        let p = densify(&[Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)], &graph()).unwrap();
        assert_eq!(p.len(), 11);
        for (i, q) in p.points().iter().enumerate() {
            assert!((q.x - i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn single_waypoint_is_rejected() {
        assert_eq!(densify(&[Vec2::ZERO], &graph()), Err(ControlError::TooFewWaypoints(1)));
    }

    #[test]
    fn off_lane_waypoint_is_rejected() {
        let r = densify(&[Vec2::ZERO, Vec2::new(5.0, 9.0)], &graph());
        assert_eq!(r, Err(ControlError::OffLaneWaypoint(1)));
    }

    #[test]
    fn crosses_successor_lanes() {
        let mut a = Lane::new(0, (0..=4).map(|i| Vec2::new(i as f64 * 5.0, 0.0)).collect(), 3.5);
        let b = Lane::new(1, (4..=8).map(|i| Vec2::new(i as f64 * 5.0, 0.0)).collect(), 3.5);
        a.successors = vec![1];
        let g = LaneGraph::new(vec![a, b]).unwrap();
        let p = densify(&[Vec2::new(2.0, 0.0), Vec2::new(32.0, 0.0)], &g).unwrap();
        assert_eq!(p.len(), 31);
        assert_eq!(p.meta()[0].lane, 0);
        assert_eq!(p.meta()[30].lane, 1);
    }
}
