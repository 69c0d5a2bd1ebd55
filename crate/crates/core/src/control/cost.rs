//! Trajectory cost.

use serde::{Deserialize, Serialize};

use super::planner::Trajectory;
use crate::geometry::OrientedBox;
use crate::math::{sqrt, wrap_angle, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights {
    pub jerk: f64,
    pub accel: f64,
    pub speed: f64,
    pub lateral: f64,
    pub obstacle: f64,
    /// Clearance below which the soft obstacle barrier is active (m).
    pub clearance: f64,
    /// Longitudinal speed below which a candidate counts as reversing.
    pub reverse_tolerance: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self { jerk: 0.1, accel: 0.1, speed: 1.0, lateral: 0.5, obstacle: 1.0, clearance: 2.0, reverse_tolerance: 0.1 }
    }
}

/// Constant-velocity obstacle prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstaclePrediction {
    pub id: u32,
    pub footprint: OrientedBox,
    pub velocity: Vec2,
}

impl ObstaclePrediction {
    pub fn at(&self, t: f64) -> OrientedBox {
        OrientedBox { center: self.footprint.center + self.velocity * t, ..self.footprint }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub jerk: f64,
    pub accel: f64,
    pub speed: f64,
    pub lateral: f64,
    pub obstacle: f64,
    /// Predicted footprint overlap or reversing; total is infinite.
    pub infeasible: bool,
    pub total: f64,
}

/// Scores a sampled trajectory.
///
/// Overlap checks inflate each sampled footprint by half the corner motion
/// to its neighbouring samples, so an infinite cost is never missed between
/// samples.
pub fn trajectory_cost(
    traj: &Trajectory,
    target_speed: f64,
    d_ref: f64,
    obstacles: &[ObstaclePrediction],
    ego_half_extents: (f64, f64),
    w: &CostWeights,
) -> CostBreakdown {
    let samples = &traj.samples;
    let mut c = CostBreakdown::default();
    let Some(last) = samples.last() else {
        c.infeasible = true;
        c.total = f64::INFINITY;
        return c;
    };
    let dt = if samples.len() > 1 { samples[1].t - samples[0].t } else { 0.0 };
    let (hl, hw) = ego_half_extents;
    let half_diag = sqrt(hl * hl + hw * hw);

    let mut jerk = 0.0;
    let mut accel = 0.0;
    let mut barrier = 0.0;
    for (i, smp) in samples.iter().enumerate() {
        let f = &smp.frenet;
        if f.s_d < -w.reverse_tolerance {
            c.infeasible = true;
        }
        jerk += (smp.lon_jerk * smp.lon_jerk + smp.lat_jerk * smp.lat_jerk) * dt;
        accel += (f.s_dd * f.s_dd + f.d_dd * f.d_dd) * dt;
        if obstacles.is_empty() {
            continue;
        }
        let reach = |j: usize| {
            let o = &samples[j];
            o.position.distance(smp.position) + wrap_angle(o.heading - smp.heading).abs() * half_diag
        };
        let mut margin: f64 = 0.0;
        if i > 0 {
            margin = margin.max(reach(i - 1));
        }
        if i + 1 < samples.len() {
            margin = margin.max(reach(i + 1));
        }
        let ego = OrientedBox::new(smp.position, smp.heading, hl, hw);
        let ego_swept = ego.inflated(0.5 * margin + 0.02);
        for ob in obstacles {
            let obox = ob.at(smp.t);
            let ob_swept = obox.inflated(0.5 * ob.velocity.norm() * dt);
            if ego_swept.overlaps(&ob_swept) {
                c.infeasible = true;
            }
            let gap = ego.distance(&obox);
            if gap < w.clearance {
                barrier += (w.clearance - gap) * (w.clearance - gap) * dt;
            }
        }
    }
    c.jerk = w.jerk * jerk;
    c.accel = w.accel * accel;
    let dv = last.speed - target_speed;
    c.speed = w.speed * dv * dv;
    let dd = last.frenet.d - d_ref;
    c.lateral = w.lateral * dd * dd;
    c.obstacle = w.obstacle * barrier;
    c.total = if c.infeasible { f64::INFINITY } else { c.jerk + c.accel + c.speed + c.lateral + c.obstacle };
    c
}
