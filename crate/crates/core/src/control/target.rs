//! Meta-action target states.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::frenet::FrenetState;
use super::ControlError;
use crate::dual::MetaAction;
use crate::math::sqrt;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TargetParams {
    /// Planning horizon (s).
    pub horizon: f64,
    /// Acceleration increment applied by AC / DC (m/s^2).
    pub delta_accel: f64,
    pub max_accel: f64,
    pub comfort_decel: f64,
    pub emergency_decel: f64,
    pub lc_advance_scales: [f64; 3],
    pub lc_speed_scales: [f64; 3],
}

impl Default for TargetParams {
    fn default() -> Self {
        Self {
            horizon: 5.0,
            delta_accel: 1.0,
            max_accel: 3.0,
            comfort_decel: 3.0,
            emergency_decel: 8.0,
            lc_advance_scales: [0.8, 1.0, 1.2],
            lc_speed_scales: [0.9, 1.0, 1.1],
        }
    }
}

/// Lateral context of the ego relative to the dense path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneContext {
    pub width: f64,
    /// Lateral offset of the lane the ego currently drives in.
    pub d_ref: f64,
    pub left_available: bool,
    pub right_available: bool,
    /// Remaining distance to a stop line the ego must respect, if any.
    pub stop_distance: Option<f64>,
}

impl LaneContext {
    pub fn centered(width: f64) -> Self {
        Self { width, d_ref: 0.0, left_available: false, right_available: false, stop_distance: None }
    }
}

/// Boundary state at the end of a candidate with separate longitudinal and
/// lateral segment durations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub state: FrenetState,
    pub lon_duration: f64,
    pub lat_duration: f64,
}

/// Stop profile from `v0` with initial acceleration `a0` over `t`: the
/// quintic through (v0, a0) -> (0, 0) has a cubic Hermite velocity whose
/// integral is `v0 t / 2 + a0 t^2 / 12`.
fn stop_displacement(v0: f64, a0: f64, t: f64) -> f64 {
    v0 * t / 2.0 + a0 * t * t / 12.0
}

fn stop_target(ego: &FrenetState, d_ref: f64, duration: f64) -> TargetState {
    let ds = stop_displacement(ego.s_d, ego.s_dd, duration).max(0.0);
    TargetState {
        state: FrenetState { s: ego.s + ds, d: d_ref, ..FrenetState::default() },
        lon_duration: duration,
        lat_duration: duration.max(1.0),
    }
}

/// Duration of a stop that ends `distance` ahead, clamped so that the
/// peak deceleration `1.5 v0 / t` stays within `emergency_decel`.
fn stop_duration(ego: &FrenetState, lane: &LaneContext, p: &TargetParams) -> f64 {
    let v0 = ego.s_d.max(0.0);
    let t_min = (1.5 * v0 / p.emergency_decel).max(0.1);
    let comfort = (v0 / p.comfort_decel).max(t_min);
    let t = match lane.stop_distance {
        None => comfort,
        Some(dist) if dist <= 0.0 => t_min,
        Some(dist) => {
            // a0 t^2 / 12 + v0 t / 2 - dist = 0
            let a = ego.s_dd / 12.0;
            let b = v0 / 2.0;
            if a.abs() < 1e-9 {
                if b > 1e-9 { dist / b } else { comfort }
            } else {
                let disc = b * b + 4.0 * a * dist;
                if disc < 0.0 {
                    t_min
                } else {
                    let r = sqrt(disc);
                    let roots = [(-b + r) / (2.0 * a), (-b - r) / (2.0 * a)];
                    roots.into_iter().filter(|t| *t > 0.0).fold(f64::INFINITY, f64::min)
                }
            }
        }
    };
    if t.is_finite() { t.clamp(t_min, p.horizon) } else { comfort.min(p.horizon) }
}

/// Candidate end states for `meta` starting from `ego`.
pub fn target_states(
    meta: MetaAction,
    ego: &FrenetState,
    lane: &LaneContext,
    p: &TargetParams,
) -> Result<Vec<TargetState>, ControlError> {
    let t = p.horizon;
    let v = ego.s_d.max(0.0);
    let straight = |a: f64| {
        let end_speed = v + a * t;
        TargetState {
            state: FrenetState {
                s: ego.s + v * t + 0.5 * a * t * t,
                s_d: end_speed,
                s_dd: a,
                d: lane.d_ref,
                d_d: 0.0,
                d_dd: 0.0,
            },
            lon_duration: t,
            lat_duration: t,
        }
    };
    let out = match meta {
        MetaAction::Ac => {
            let a = (ego.s_dd.max(0.0) + p.delta_accel).min(p.max_accel);
            alloc::vec![straight(a)]
        }
        MetaAction::Dc => {
            let a = (ego.s_dd.min(0.0) - p.delta_accel).max(-p.comfort_decel);
            if v + a * t >= 0.0 {
                alloc::vec![straight(a)]
            } else {
                // reaches standstill inside the horizon; hold at zero after
                let dur = (v / -a).max(0.1);
                alloc::vec![stop_target(ego, lane.d_ref, dur)]
            }
        }
        MetaAction::Idle => alloc::vec![straight(0.0)],
        MetaAction::Stop => {
            if v < 0.05 {
                alloc::vec![stop_target(&FrenetState { s_d: 0.0, s_dd: 0.0, ..*ego }, lane.d_ref, 1.0)]
            } else {
                alloc::vec![stop_target(ego, lane.d_ref, stop_duration(ego, lane, p))]
            }
        }
        MetaAction::Lcl | MetaAction::Lcr => {
            let (ok, sign) = match meta {
                MetaAction::Lcl => (lane.left_available, 1.0),
                _ => (lane.right_available, -1.0),
            };
            if !ok {
                return Err(ControlError::NoAdjacentLane(meta));
            }
            let d_t = lane.d_ref + sign * lane.width;
            let mut v_out = Vec::with_capacity(9);
            for ka in p.lc_advance_scales {
                for kv in p.lc_speed_scales {
                    v_out.push(TargetState {
                        state: FrenetState {
                            s: ego.s + ka * v * t,
                            s_d: kv * v,
                            s_dd: 0.0,
                            d: d_t,
                            d_d: 0.0,
                            d_dd: 0.0,
                        },
                        lon_duration: t,
                        lat_duration: t,
                    });
                }
            }
            v_out
        }
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ego(v: f64) -> FrenetState {
        FrenetState { s: 10.0, s_d: v, ..FrenetState::default() }
    }

    #[test]
    fn ac_constant_acceleration() {
        let t = target_states(MetaAction::Ac, &ego(5.0), &LaneContext::centered(3.5), &TargetParams::default()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].state.s_d, 10.0);
        assert_eq!(t[0].state.s - 10.0, 37.5);
        assert_eq!(t[0].state.d, 0.0);
    }

    #[test]
    fn stop_ends_at_rest() {
        let t = target_states(MetaAction::Stop, &ego(8.0), &LaneContext::centered(3.5), &TargetParams::default()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].state.s_d, 0.0);
        assert!(t[0].state.s > 10.0);
    }

    #[test]
    fn stop_honours_stop_line() {
        let lane = LaneContext { stop_distance: Some(20.0), ..LaneContext::centered(3.5) };
        let t = target_states(MetaAction::Stop, &ego(8.0), &lane, &TargetParams::default()).unwrap();
        assert!((t[0].state.s - 30.0).abs() < 1e-9);
        assert!((t[0].lon_duration - 5.0).abs() < 1e-9);
    }

    #[test]
    fn lcl_grid() {
        let lane = LaneContext { left_available: true, ..LaneContext::centered(3.5) };
        let t = target_states(MetaAction::Lcl, &ego(10.0), &lane, &TargetParams::default()).unwrap();
        assert_eq!(t.len(), 9);
        assert!(t.iter().all(|c| c.state.d == 3.5));
    }

    #[test]
    fn lcr_without_lane_fails() {
        let r = target_states(MetaAction::Lcr, &ego(10.0), &LaneContext::centered(3.5), &TargetParams::default());
        assert_eq!(r, Err(ControlError::NoAdjacentLane(MetaAction::Lcr)));
    }

    #[test]
    fn dc_to_standstill_uses_stop_profile() {
        let t = target_states(MetaAction::Dc, &ego(6.0), &LaneContext::centered(3.5), &TargetParams::default()).unwrap();
        // a = -1 reaches zero after 6 s > horizon, so constant decel applies
        assert!((t[0].state.s_d - 1.0).abs() < 1e-12);
        let slow = FrenetState { s_dd: -2.5, ..ego(4.0) };
        let t = target_states(MetaAction::Dc, &slow, &LaneContext::centered(3.5), &TargetParams::default()).unwrap();
        assert_eq!(t[0].state.s_d, 0.0);
    }
}
