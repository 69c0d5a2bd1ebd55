//! Low-level control: dense path, Frenet planning and PID tracking.

pub mod cost;
pub mod frenet;
pub mod path;
pub mod pid;
pub mod planner;
pub mod quintic;
pub mod target;

use thiserror::Error;

use crate::dual::MetaAction;

pub use cost::{trajectory_cost, CostBreakdown, CostWeights, ObstaclePrediction};
pub use frenet::FrenetState;
pub use path::{densify, DensePath, PathPointMeta};
pub use pid::{Pid, PidGains, Tracker};
pub use planner::{
    emergency_stop, lookahead_index, lookahead_select, plan, plan_with_debug, PlanContext, PlanDebug, PlannerConfig,
    Trajectory, TrajectorySample,
};
pub use quintic::Quintic;
pub use target::{target_states, LaneContext, TargetParams, TargetState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("route needs at least 2 waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("route waypoint {0} is not on any lane")]
    OffLaneWaypoint(usize),
    #[error("route waypoint {0} is not reachable from the previous one")]
    Unreachable(usize),
    #[error("route is too short ({0:.3} m)")]
    RouteTooShort(f64),
    #[error("dense path spacing {spacing:.3} m at point {index} is outside [0.5, 1.5]")]
    Discontinuous { index: usize, spacing: f64 },
    #[error("pose is {distance:.2} m from the path, beyond {limit:.2} m")]
    TooFarFromPath { distance: f64, limit: f64 },
    #[error("non-finite input")]
    NonFinite,
    #[error("polynomial duration must be positive, got {0}")]
    InvalidDuration(f64),
    #[error("{0:?} requested but no adjacent lane exists")]
    NoAdjacentLane(MetaAction),
}
