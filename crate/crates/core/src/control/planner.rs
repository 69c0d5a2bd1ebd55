//! Candidate generation and selection.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::cost::{trajectory_cost, CostBreakdown, CostWeights, ObstaclePrediction};
use super::frenet::FrenetState;
use super::path::DensePath;
use super::quintic::Quintic;
use super::target::{target_states, LaneContext, TargetParams, TargetState};
use super::ControlError;
use crate::dual::MetaAction;
use crate::math::{round, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub dt: f64,
    pub targets: TargetParams,
    pub weights: CostWeights,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self { dt: 0.05, targets: TargetParams::default(), weights: CostWeights::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub accel: f64,
    pub lon_jerk: f64,
    pub lat_jerk: f64,
    pub frenet: FrenetState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    /// Index of the selected candidate; `None` for the emergency stop.
    pub candidate: Option<usize>,
    pub cost: f64,
    pub emergency: bool,
    pub lon: Quintic,
    pub lat: Quintic,
}

impl Trajectory {
    /// Samples `s(t)` and `d(t)` at `dt` over `horizon` and maps them onto
    /// `path`.
    pub fn from_polys(path: &DensePath, lon: Quintic, lat: Quintic, horizon: f64, dt: f64) -> Self {
        let n = round(horizon / dt) as usize;
        let samples = (0..=n).map(|i| sample_at(path, &lon, &lat, i as f64 * dt)).collect();
        Self { samples, candidate: None, cost: f64::INFINITY, emergency: false, lon, lat }
    }

    pub fn first(&self) -> &TrajectorySample {
        &self.samples[0]
    }
}

/// Evaluates a pair of Frenet polynomials at `t` in world coordinates.
pub fn sample_at(path: &DensePath, lon: &Quintic, lat: &Quintic, t: f64) -> TrajectorySample {
    let [s, s_d, s_dd, s_ddd] = lon.eval(t);
    let [d, d_d, d_dd, d_ddd] = lat.eval(t);
    let frenet = FrenetState { s, s_d, s_dd, d, d_d, d_dd };
    let (position, heading, speed) = path.state_to_world(&frenet);
    TrajectorySample { t, position, heading, speed, accel: s_dd, lon_jerk: s_ddd, lat_jerk: d_ddd, frenet }
}

/// Planning inputs besides the meta-action.
#[derive(Debug, Clone, Copy)]
pub struct PlanContext<'a> {
    pub path: &'a DensePath,
    pub lane: LaneContext,
    pub target_speed: f64,
    pub obstacles: &'a [ObstaclePrediction],
    pub ego_half_extents: (f64, f64),
}

/// Every candidate with its cost, in generation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDebug {
    pub targets: Vec<TargetState>,
    pub costs: Vec<CostBreakdown>,
}

fn build(ego: &FrenetState, target: &TargetState, ctx: &PlanContext<'_>, cfg: &PlannerConfig) -> Result<Trajectory, ControlError> {
    let e = &target.state;
    let lon = Quintic::solve([ego.s, ego.s_d, ego.s_dd], [e.s, e.s_d, e.s_dd], target.lon_duration)?;
    let lat = Quintic::solve([ego.d, ego.d_d, ego.d_dd], [e.d, e.d_d, e.d_dd], target.lat_duration)?;
    Ok(Trajectory::from_polys(ctx.path, lon, lat, cfg.targets.horizon, cfg.dt))
}

/// Plans a trajectory for `meta` and returns it with per-candidate costs.
pub fn plan_with_debug(
    meta: MetaAction,
    ego: &FrenetState,
    ctx: &PlanContext<'_>,
    cfg: &PlannerConfig,
) -> Result<(Trajectory, PlanDebug), ControlError> {
    let targets = target_states(meta, ego, &ctx.lane, &cfg.targets)?;
    let mut best: Option<(usize, Trajectory)> = None;
    let mut costs = Vec::with_capacity(targets.len());
    for (i, target) in targets.iter().enumerate() {
        let mut traj = build(ego, target, ctx, cfg)?;
        let c = trajectory_cost(&traj, ctx.target_speed, ctx.lane.d_ref, ctx.obstacles, ctx.ego_half_extents, &cfg.weights);
        costs.push(c);
        if c.total.is_finite() && best.as_ref().is_none_or(|(_, b)| c.total < b.cost) {
            traj.candidate = Some(i);
            traj.cost = c.total;
            best = Some((i, traj));
        }
    }
    let traj = match best {
        Some((_, t)) => t,
        None => {
            log::debug!("all {} candidates infeasible for {meta:?}; emergency stop", targets.len());
            emergency_stop(ego, ctx, cfg)?
        }
    };
    Ok((traj, PlanDebug { targets, costs }))
}

pub fn plan(meta: MetaAction, ego: &FrenetState, ctx: &PlanContext<'_>, cfg: &PlannerConfig) -> Result<Trajectory, ControlError> {
    plan_with_debug(meta, ego, ctx, cfg).map(|(t, _)| t)
}

/// Hardest admissible stop with the lateral offset held.
pub fn emergency_stop(ego: &FrenetState, ctx: &PlanContext<'_>, cfg: &PlannerConfig) -> Result<Trajectory, ControlError> {
    let v0 = ego.s_d.max(0.0);
    let dur = (1.5 * v0 / cfg.targets.emergency_decel).max(0.1);
    let a0 = ego.s_dd.min(0.0).max(-cfg.targets.emergency_decel);
    let ds = (v0 * dur / 2.0 + a0 * dur * dur / 12.0).max(0.0);
    let lon = Quintic::solve([ego.s, v0, a0], [ego.s + ds, 0.0, 0.0], dur)?;
    let lat = Quintic::solve([ego.d, ego.d_d, 0.0], [ego.d, 0.0, 0.0], 1.0)?;
    let mut t = Trajectory::from_polys(ctx.path, lon, lat, cfg.targets.horizon, cfg.dt);
    t.emergency = true;
    Ok(t)
}

pub const LOOKAHEAD_GAIN: f64 = 20.0;
pub const LOOKAHEAD_MIN_SPEED: f64 = 1.0;
pub const LOOKAHEAD_MIN_INDEX: usize = 4;
pub const LOOKAHEAD_MAX_INDEX: usize = 40;

/// Number of samples to look ahead at `speed`.
pub fn lookahead_index(speed: f64) -> usize {
    let raw = round(LOOKAHEAD_GAIN / speed.max(LOOKAHEAD_MIN_SPEED));
    (raw as usize).clamp(LOOKAHEAD_MIN_INDEX, LOOKAHEAD_MAX_INDEX)
}

/// Picks the tracking target `lookahead_index(speed)` samples past the
/// sample nearest to `position`.
pub fn lookahead_select(traj: &Trajectory, speed: f64, position: Vec2) -> (f64, &TrajectorySample) {
    let base = traj
        .samples
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.position.distance(position).total_cmp(&b.1.position.distance(position)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let i = (base + lookahead_index(speed)).min(traj.samples.len() - 1);
    let smp = &traj.samples[i];
    (smp.speed, smp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::path::PathPointMeta;

    fn straight() -> DensePath {
        let meta = PathPointMeta { lane: 0, width: 3.5, lanes_left: 1, lanes_right: 0 };
        DensePath::from_points((0..=300).map(|i| Vec2::new(i as f64, 0.0)).collect(), meta).unwrap()
    }

    #[test]
    fn lookahead_indices() {
        assert_eq!(lookahead_index(1.0), 20);
        assert_eq!(lookahead_index(10.0), 4);
        assert_eq!(lookahead_index(0.0), 20);
        assert_eq!(lookahead_index(0.4), 20);
        assert_eq!(lookahead_index(2.0), 10);
    }

    #[test]
    fn idle_holds_speed() {
        let path = straight();
        let ctx = PlanContext { path: &path, lane: LaneContext::centered(3.5), target_speed: 10.0, obstacles: &[], ego_half_extents: (2.4, 1.0) };
        let ego = FrenetState { s: 5.0, s_d: 10.0, ..Default::default() };
        let t = plan(MetaAction::Idle, &ego, &ctx, &PlannerConfig::default()).unwrap();
        assert_eq!(t.samples.len(), 101);
        assert!(t.samples.iter().all(|s| (s.speed - 10.0).abs() < 0.1));
    }

    #[test]
    fn stop_is_monotone() {
        let path = straight();
        let ctx = PlanContext { path: &path, lane: LaneContext::centered(3.5), target_speed: 10.0, obstacles: &[], ego_half_extents: (2.4, 1.0) };
        let ego = FrenetState { s: 5.0, s_d: 8.0, ..Default::default() };
        let t = plan(MetaAction::Stop, &ego, &ctx, &PlannerConfig::default()).unwrap();
        assert!(t.samples.last().unwrap().speed.abs() < 1e-9);
        for w in t.samples.windows(2) {
            assert!(w[1].frenet.s_d <= w[0].frenet.s_d + 1e-12);
        }
    }
}
