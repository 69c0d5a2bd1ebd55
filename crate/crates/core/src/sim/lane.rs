//! Lane centerlines and the lane adjacency graph.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geometry::closest_param;
use crate::math::Vec2;

pub type LaneId = u32;

/// Maximum spacing between consecutive centerline points.
pub const MAX_CENTERLINE_SPACING: f64 = 5.0;
pub const MIN_LANE_WIDTH: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LaneGraphError {
    #[error("lanes[{index}]: {reason}")]
    InvalidLane { index: usize, reason: String },
    #[error("lane {lane}: {reason}")]
    Adjacency { lane: LaneId, reason: String },
}

/// Piecewise-linear curve with cumulative arc length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    points: Vec<Vec2>,
    cum: Vec<f64>,
}

/// Projection of a point onto a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolylineProjection {
    pub s: f64,
    /// Signed offset, positive to the left of the direction of travel.
    pub lateral: f64,
    pub distance: f64,
    pub segment: usize,
}

impl Polyline {
    /// Builds a polyline, dropping consecutive duplicate points.
    pub fn new(points: Vec<Vec2>) -> Self {
        let mut pts: Vec<Vec2> = Vec::with_capacity(points.len());
        for p in points {
            if pts.last().is_none_or(|q: &Vec2| q.distance(p) > 1e-9) {
                pts.push(p);
            }
        }
        let mut cum = Vec::with_capacity(pts.len());
        let mut acc = 0.0;
        for (i, p) in pts.iter().enumerate() {
            if i > 0 {
                acc += pts[i - 1].distance(*p);
            }
            cum.push(acc);
        }
        Self { points: pts, cum }
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cum
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.cum.last().copied().unwrap_or(0.0)
    }

    /// Index of the segment containing arc length `s` (clamped to the ends).
    pub fn segment_at(&self, s: f64) -> usize {
        if self.points.len() < 2 {
            return 0;
        }
        let last = self.points.len() - 2;
        match self.cum.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(last),
            Err(i) => i.saturating_sub(1).min(last),
        }
    }

    /// Point at arc length `s`; extrapolates linearly past either end.
    pub fn point_at(&self, s: f64) -> Vec2 {
        match self.points.len() {
            0 => Vec2::ZERO,
            1 => self.points[0],
            _ => {
                let i = self.segment_at(s);
                let (a, b) = (self.points[i], self.points[i + 1]);
                let seg = self.cum[i + 1] - self.cum[i];
                a.lerp(b, (s - self.cum[i]) / seg)
            }
        }
    }

    pub fn tangent_at(&self, s: f64) -> Vec2 {
        if self.points.len() < 2 {
            return Vec2::new(1.0, 0.0);
        }
        let i = self.segment_at(s);
        (self.points[i + 1] - self.points[i]).normalized()
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        self.tangent_at(s).angle()
    }

    /// Nearest-point projection (clamped to the polyline).
    pub fn project(&self, p: Vec2) -> PolylineProjection {
        if self.points.len() < 2 {
            let q = self.points.first().copied().unwrap_or(Vec2::ZERO);
            return PolylineProjection { s: 0.0, lateral: 0.0, distance: p.distance(q), segment: 0 };
        }
        let mut best = PolylineProjection {
            s: 0.0,
            lateral: 0.0,
            distance: f64::INFINITY,
            segment: 0,
        };
        for i in 0..self.points.len() - 1 {
            let (a, b) = (self.points[i], self.points[i + 1]);
            let t = closest_param(p, a, b);
            let q = a.lerp(b, t);
            let d = p.distance(q);
            if d < best.distance {
                let e = b - a;
                let lateral = e.normalized().cross(p - a);
                best = PolylineProjection {
                    s: self.cum[i] + t * (self.cum[i + 1] - self.cum[i]),
                    lateral: if lateral >= 0.0 { d } else { -d },
                    distance: d,
                    segment: i,
                };
            }
        }
        best
    }

    pub fn max_spacing(&self) -> f64 {
        self.cum.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub id: LaneId,
    pub centerline: Polyline,
    pub width: f64,
    #[serde(default)]
    pub successors: Vec<LaneId>,
    #[serde(default)]
    pub left: Option<LaneId>,
    #[serde(default)]
    pub right: Option<LaneId>,
    /// Arc length of a stop sign's stop line on this lane.
    #[serde(default)]
    pub stop_sign_s: Option<f64>,
    #[serde(default)]
    pub speed_limit: Option<f64>,
}

impl Lane {
    pub fn new(id: LaneId, points: Vec<Vec2>, width: f64) -> Self {
        Self {
            id,
            centerline: Polyline::new(points),
            width,
            successors: Vec::new(),
            left: None,
            right: None,
            stop_sign_s: None,
            speed_limit: None,
        }
    }

    pub fn length(&self) -> f64 {
        self.centerline.length()
    }
}

/// A lane a world point falls on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneMatch {
    pub lane: LaneId,
    pub s: f64,
    pub lateral: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LaneGraph {
    lanes: Vec<Lane>,
}

impl LaneGraph {
    /// Validates spacing, width and adjacency symmetry.
    pub fn new(lanes: Vec<Lane>) -> Result<Self, LaneGraphError> {
        let g = Self { lanes };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<(), LaneGraphError> {
        for (index, lane) in self.lanes.iter().enumerate() {
            let bad = |reason: String| LaneGraphError::InvalidLane { index, reason };
            if self.lanes[..index].iter().any(|l| l.id == lane.id) {
                return Err(bad(format!("duplicate lane id {}", lane.id)));
            }
            if lane.centerline.len() < 2 {
                return Err(bad("centerline needs at least 2 distinct points".into()));
            }
            if lane.centerline.points().iter().any(|p| !p.is_finite()) {
                return Err(bad("centerline has non-finite coordinates".into()));
            }
            let spacing = lane.centerline.max_spacing();
            if spacing > MAX_CENTERLINE_SPACING + 1e-9 {
                return Err(bad(format!(
                    "centerline spacing {spacing:.3} m exceeds {MAX_CENTERLINE_SPACING} m"
                )));
            }
            if !(lane.width > MIN_LANE_WIDTH) {
                return Err(bad(format!("width {} m must exceed {MIN_LANE_WIDTH} m", lane.width)));
            }
        }
        for lane in &self.lanes {
            let adj = |reason: String| LaneGraphError::Adjacency { lane: lane.id, reason };
            for &succ in &lane.successors {
                if self.lane(succ).is_none() {
                    return Err(adj(format!("unknown successor {succ}")));
                }
            }
            if let Some(l) = lane.left {
                match self.lane(l) {
                    None => return Err(adj(format!("unknown left neighbour {l}"))),
                    Some(other) if other.right != Some(lane.id) => {
                        return Err(adj(format!("left neighbour {l} does not list {} as right", lane.id)))
                    }
                    _ => {}
                }
            }
            if let Some(r) = lane.right {
                match self.lane(r) {
                    None => return Err(adj(format!("unknown right neighbour {r}"))),
                    Some(other) if other.left != Some(lane.id) => {
                        return Err(adj(format!("right neighbour {r} does not list {} as left", lane.id)))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    pub fn lane(&self, id: LaneId) -> Option<&Lane> {
        self.lanes.iter().find(|l| l.id == id)
    }

    /// Best lane containing `p` (within half a lane width), preferring the
    /// smallest lateral offset and, among ties, headings closest to `heading`.
    pub fn locate(&self, p: Vec2, heading: Option<f64>) -> Option<LaneMatch> {
        let mut best: Option<(f64, LaneMatch)> = None;
        for lane in &self.lanes {
            let proj = lane.centerline.project(p);
            if proj.distance > lane.width / 2.0 + 1e-9 {
                continue;
            }
            // points beyond a lane's ends only count when they are essentially on it
            let end_slack = 0.5;
            if proj.s <= 0.0 || proj.s >= lane.length() {
                let along = if proj.s <= 0.0 {
                    (p - lane.centerline.point_at(0.0)).dot(lane.centerline.tangent_at(0.0))
                } else {
                    (p - lane.centerline.point_at(lane.length())).dot(lane.centerline.tangent_at(lane.length()))
                };
                if along.abs() > end_slack {
                    continue;
                }
            }
            let mut score = proj.distance;
            if let Some(h) = heading {
                let dh = crate::math::wrap_angle(lane.centerline.heading_at(proj.s) - h).abs();
                score += dh;
            }
            let m = LaneMatch { lane: lane.id, s: proj.s, lateral: proj.lateral };
            if best.as_ref().is_none_or(|(bs, _)| score < *bs) {
                best = Some((score, m));
            }
        }
        best.map(|(_, m)| m)
    }

    /// Smallest distance from `p` to any lane's drivable boundary; negative
    /// when inside some lane.
    pub fn boundary_excess(&self, p: Vec2) -> f64 {
        self.lanes
            .iter()
            .map(|l| l.centerline.project(p).distance - l.width / 2.0)
            .fold(f64::INFINITY, f64::min)
    }

    /// Number of same-direction lanes reachable by repeatedly stepping left.
    pub fn lanes_to_left(&self, id: LaneId) -> u8 {
        self.count_side(id, |l| l.left)
    }

    pub fn lanes_to_right(&self, id: LaneId) -> u8 {
        self.count_side(id, |l| l.right)
    }

    fn count_side(&self, id: LaneId, next: impl Fn(&Lane) -> Option<LaneId>) -> u8 {
        let mut n = 0u8;
        let mut cur = self.lane(id);
        while let Some(l) = cur.and_then(&next) {
            n = n.saturating_add(1);
            if n as usize > self.lanes.len() {
                break;
            }
            cur = self.lane(l);
        }
        n
    }

    /// Breadth-first successor path from `from` to `to` (inclusive).
    pub fn successor_path(&self, from: LaneId, to: LaneId) -> Option<Vec<LaneId>> {
        if from == to {
            return Some(alloc::vec![from]);
        }
        let mut prev: alloc::collections::BTreeMap<LaneId, LaneId> = Default::default();
        let mut queue = alloc::collections::VecDeque::from([from]);
        while let Some(cur) = queue.pop_front() {
            for &n in &self.lane(cur)?.successors {
                if n == from || prev.contains_key(&n) {
                    continue;
                }
                prev.insert(n, cur);
                if n == to {
                    let mut path = alloc::vec![to];
                    let mut c = to;
                    while let Some(&p) = prev.get(&c) {
                        path.push(p);
                        c = p;
                    }
                    path.reverse();
                    return Some(path);
                }
                queue.push_back(n);
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn straight(id: LaneId, y: f64, len: f64) -> Lane {
        let n = (len / 5.0) as usize;
        Lane::new(id, (0..=n).map(|i| Vec2::new(i as f64 * 5.0, y)).collect(), 3.5)
    }

    #[test]
    fn projection_sign_and_arclength() {
        let pl = Polyline::new(vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)]);
        let p = pl.project(Vec2::new(4.0, 1.0));
        assert_eq!(p.s, 4.0);
        assert_eq!(p.lateral, 1.0);
        let p = pl.project(Vec2::new(4.0, -2.0));
        assert_eq!(p.lateral, -2.0);
        assert_eq!(pl.point_at(12.0), Vec2::new(12.0, 0.0));
    }

    #[test]
    fn rejects_sparse_centerline() {
        let lane = Lane::new(0, vec![Vec2::new(0.0, 0.0), Vec2::new(6.0, 0.0)], 3.5);
        assert!(matches!(LaneGraph::new(vec![lane]), Err(LaneGraphError::InvalidLane { .. })));
    }

    #[test]
    fn rejects_narrow_lane() {
        let mut lane = straight(0, 0.0, 10.0);
        lane.width = 2.0;
        assert!(LaneGraph::new(vec![lane]).is_err());
    }

    #[test]
    fn adjacency_must_be_symmetric() {
        let mut a = straight(0, 0.0, 20.0);
        let b = straight(1, 3.5, 20.0);
        a.left = Some(1);
        assert!(matches!(LaneGraph::new(vec![a.clone(), b.clone()]), Err(LaneGraphError::Adjacency { .. })));
        let mut b = b;
        b.right = Some(0);
        let g = LaneGraph::new(vec![a, b]).unwrap();
        assert_eq!(g.lanes_to_left(0), 1);
        assert_eq!(g.lanes_to_right(1), 1);
        assert_eq!(g.lanes_to_left(1), 0);
    }

    #[test]
    fn successor_search() {
        let mut a = straight(0, 0.0, 20.0);
        let mut b = straight(1, 0.0, 20.0);
        let c = straight(2, 0.0, 20.0);
        a.successors = vec![1];
        b.successors = vec![2];
        let g = LaneGraph::new(vec![a, b, c]).unwrap();
        assert_eq!(g.successor_path(0, 2), Some(vec![0, 1, 2]));
        assert_eq!(g.successor_path(2, 0), None);
    }
}
