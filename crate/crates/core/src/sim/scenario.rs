//! Scenario documents and their validated form.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::lane::{Lane, LaneGraph, LaneGraphError, LaneId, Polyline};
use crate::math::Vec2;

pub const SCHEMA_VERSION: u32 = 1;

/// Agent id reserved for the ego vehicle.
pub const EGO_ID: u32 = 0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("schema_version {found} is not supported (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: u32 },
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },
    #[error(transparent)]
    LaneGraph(#[from] LaneGraphError),
}

fn invalid(path: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { path: path.into(), reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightPhase {
    Red,
    Yellow,
    Green,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpan {
    pub phase: LightPhase,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficLight {
    pub id: u32,
    /// Lane whose traffic this light governs.
    pub lane: LaneId,
    /// Arc length of the stop line along `lane`.
    pub stop_s: f64,
    pub schedule: Vec<PhaseSpan>,
    /// Time into the cycle at t = 0. Derived from the scenario seed when absent.
    #[serde(default)]
    pub offset_s: Option<f64>,
}

impl TrafficLight {
    pub fn cycle(&self) -> f64 {
        self.schedule.iter().map(|p| p.duration).sum()
    }

    pub fn offset(&self, seed: u64) -> f64 {
        match self.offset_s {
            Some(o) => o,
            None => {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(self.id as u64 + 1)));
                rng.random::<f64>() * self.cycle()
            }
        }
    }

    pub fn phase_at(&self, t: f64, seed: u64) -> LightPhase {
        let cycle = self.cycle();
        let mut u = (t + self.offset(seed)) % cycle;
        if u < 0.0 {
            u += cycle;
        }
        for span in &self.schedule {
            if u < span.duration {
                return span.phase;
            }
            u -= span.duration;
        }
        self.schedule.last().map(|p| p.phase).unwrap_or(LightPhase::Green)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Vehicle,
    Cyclist,
    Pedestrian,
    Static,
}

/// One timed command of an agent's behaviour script.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptCommand {
    /// Simulation time (s) at which the command takes effect.
    pub t: f64,
    #[serde(default)]
    pub speed: Option<f64>,
    /// Rate (m/s^2) used to reach `speed`; instantaneous when absent.
    #[serde(default)]
    pub accel: Option<f64>,
    /// Switches to an adjacent lane over `lane_change_s` seconds.
    #[serde(default)]
    pub lane: Option<LaneId>,
    #[serde(default = "default_lane_change_s")]
    pub lane_change_s: f64,
}

fn default_lane_change_s() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AgentRoute {
    Lane { lane: LaneId, s: f64 },
    Path { path: Polyline, s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: u32,
    pub kind: AgentKind,
    pub route: AgentRoute,
    pub speed: f64,
    pub half_length: f64,
    pub half_width: f64,
    pub script: Vec<ScriptCommand>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoSpawn {
    pub lane: LaneId,
    pub s: f64,
    pub speed: f64,
    pub wheelbase: f64,
    pub half_length: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavManeuver {
    Straight,
    Left,
    Right,
    LaneChangeLeft,
    LaneChangeRight,
}

/// Scripted navigation request: from route arc length `at_s` on, ask for a
/// lane change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavCommand {
    pub at_s: f64,
    pub maneuver: NavManeuver,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLimits {
    pub max_sim_time_s: f64,
    pub max_wall_time_s: f64,
}

impl Default for EpisodeLimits {
    fn default() -> Self {
        Self { max_sim_time_s: 120.0, max_wall_time_s: 300.0 }
    }
}

/// Validated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub lanes: LaneGraph,
    pub lights: Vec<TrafficLight>,
    pub ego: EgoSpawn,
    pub route: Vec<Vec2>,
    pub target_speed: f64,
    pub navigation: Vec<NavCommand>,
    pub agents: Vec<AgentSpec>,
    pub limits: EpisodeLimits,
}

// ---------------------------------------------------------------------------
// document form

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub lanes: Vec<LaneDoc>,
    #[serde(default)]
    pub lights: Vec<TrafficLightDoc>,
    pub ego: EgoDoc,
    pub route: Vec<[f64; 2]>,
    #[serde(default = "default_target_speed")]
    pub target_speed: f64,
    #[serde(default)]
    pub navigation: Vec<NavCommand>,
    #[serde(default)]
    pub agents: Vec<AgentDoc>,
    #[serde(default)]
    pub limits: Option<EpisodeLimits>,
}

fn default_target_speed() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneDoc {
    pub id: LaneId,
    pub centerline: Vec<[f64; 2]>,
    #[serde(default = "default_lane_width")]
    pub width: f64,
    #[serde(default)]
    pub successors: Vec<LaneId>,
    #[serde(default)]
    pub left: Option<LaneId>,
    #[serde(default)]
    pub right: Option<LaneId>,
    #[serde(default)]
    pub stop_sign_s: Option<f64>,
    #[serde(default)]
    pub speed_limit: Option<f64>,
}

fn default_lane_width() -> f64 {
    3.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficLightDoc {
    pub id: u32,
    pub lane: LaneId,
    pub stop_s: f64,
    pub schedule: Vec<(LightPhase, f64)>,
    #[serde(default)]
    pub offset_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoDoc {
    pub lane: LaneId,
    #[serde(default)]
    pub s: f64,
    #[serde(default)]
    pub speed: f64,
    #[serde(default = "default_wheelbase")]
    pub wheelbase: f64,
    #[serde(default = "default_half_length")]
    pub half_length: f64,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
}

fn default_wheelbase() -> f64 {
    2.7
}
fn default_half_length() -> f64 {
    2.4
}
fn default_half_width() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentDoc {
    pub id: u32,
    pub kind: AgentKind,
    #[serde(default)]
    pub lane: Option<LaneId>,
    #[serde(default)]
    pub path: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub s: f64,
    #[serde(default)]
    pub speed: f64,
    #[serde(default)]
    pub half_length: Option<f64>,
    #[serde(default)]
    pub half_width: Option<f64>,
    #[serde(default)]
    pub script: Vec<ScriptCommand>,
}

fn default_extents(kind: AgentKind) -> (f64, f64) {
    match kind {
        AgentKind::Vehicle => (2.4, 1.0),
        AgentKind::Cyclist => (0.9, 0.4),
        AgentKind::Pedestrian => (0.3, 0.3),
        AgentKind::Static => (1.0, 1.0),
    }
}

fn points(raw: &[[f64; 2]]) -> Vec<Vec2> {
    raw.iter().map(|&p| Vec2::from(p)).collect()
}

fn check_finite(path: &str, v: f64) -> Result<f64, ScenarioError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(path, "must be finite"))
    }
}

impl Scenario {
    /// Validates a parsed document into a scenario.
    pub fn from_doc(doc: &ScenarioDoc) -> Result<Scenario, ScenarioError> {
        if doc.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::SchemaVersion { found: doc.schema_version });
        }
        if doc.lanes.is_empty() {
            return Err(invalid("lanes", "at least one lane is required"));
        }
        let lanes = doc
            .lanes
            .iter()
            .map(|l| Lane {
                id: l.id,
                centerline: Polyline::new(points(&l.centerline)),
                width: l.width,
                successors: l.successors.clone(),
                left: l.left,
                right: l.right,
                stop_sign_s: l.stop_sign_s,
                speed_limit: l.speed_limit,
            })
            .collect();
        let graph = LaneGraph::new(lanes)?;
        let lane_len = |path: &str, id: LaneId| {
            graph
                .lane(id)
                .map(|l| l.length())
                .ok_or_else(|| invalid(path, format!("unknown lane {id}")))
        };

        let mut lights = Vec::with_capacity(doc.lights.len());
        for (i, l) in doc.lights.iter().enumerate() {
            let p = format!("lights[{i}]");
            let len = lane_len(&format!("{p}.lane"), l.lane)?;
            if !(0.0..=len).contains(&l.stop_s) {
                return Err(invalid(format!("{p}.stop_s"), format!("{} outside lane length {len:.1}", l.stop_s)));
            }
            if l.schedule.is_empty() {
                return Err(invalid(format!("{p}.schedule"), "schedule is empty"));
            }
            for (j, (_, d)) in l.schedule.iter().enumerate() {
                if !(*d > 0.0) || !d.is_finite() {
                    return Err(invalid(format!("{p}.schedule[{j}]"), "durations must be positive"));
                }
            }
            if lights.iter().any(|o: &TrafficLight| o.id == l.id) {
                return Err(invalid(format!("{p}.id"), format!("duplicate light id {}", l.id)));
            }
            lights.push(TrafficLight {
                id: l.id,
                lane: l.lane,
                stop_s: l.stop_s,
                schedule: l.schedule.iter().map(|&(phase, duration)| PhaseSpan { phase, duration }).collect(),
                offset_s: l.offset_s,
            });
        }

        let e = &doc.ego;
        let len = lane_len("ego.lane", e.lane)?;
        if !(0.0..=len).contains(&e.s) {
            return Err(invalid("ego.s", format!("{} outside lane length {len:.1}", e.s)));
        }
        if !(e.speed >= 0.0) {
            return Err(invalid("ego.speed", "must be non-negative"));
        }
        if !(e.wheelbase > 0.0) {
            return Err(invalid("ego.wheelbase", "must be positive"));
        }
        if !(e.half_length > 0.0 && e.half_width > 0.0) {
            return Err(invalid("ego", "footprint half-extents must be positive"));
        }
        let ego = EgoSpawn {
            lane: e.lane,
            s: e.s,
            speed: e.speed,
            wheelbase: e.wheelbase,
            half_length: e.half_length,
            half_width: e.half_width,
        };

        if doc.route.len() < 2 {
            return Err(invalid("route", "at least 2 waypoints are required"));
        }
        let mut route = Vec::with_capacity(doc.route.len());
        for (i, &w) in doc.route.iter().enumerate() {
            let p = Vec2::from(w);
            if !p.is_finite() || graph.locate(p, None).is_none() {
                return Err(invalid(format!("route[{i}]"), format!("waypoint ({}, {}) is not on any lane", w[0], w[1])));
            }
            route.push(p);
        }

        check_finite("target_speed", doc.target_speed)?;
        if !(doc.target_speed > 0.0) {
            return Err(invalid("target_speed", "must be positive"));
        }

        let mut agents = Vec::with_capacity(doc.agents.len());
        for (i, a) in doc.agents.iter().enumerate() {
            let p = format!("agents[{i}]");
            if a.id == EGO_ID {
                return Err(invalid(format!("{p}.id"), "id 0 is reserved for the ego vehicle"));
            }
            if agents.iter().any(|o: &AgentSpec| o.id == a.id) {
                return Err(invalid(format!("{p}.id"), format!("duplicate agent id {}", a.id)));
            }
            let route = match (&a.lane, &a.path) {
                (Some(lane), None) => {
                    let len = lane_len(&format!("{p}.lane"), *lane)?;
                    if !(0.0..=len).contains(&a.s) {
                        return Err(invalid(format!("{p}.s"), format!("{} outside lane length {len:.1}", a.s)));
                    }
                    AgentRoute::Lane { lane: *lane, s: a.s }
                }
                (None, Some(path)) => {
                    let pl = Polyline::new(points(path));
                    if pl.len() < 2 {
                        return Err(invalid(format!("{p}.path"), "needs at least 2 distinct points"));
                    }
                    AgentRoute::Path { path: pl, s: a.s }
                }
                _ => return Err(invalid(p.as_str(), "exactly one of `lane` or `path` is required")),
            };
            if !(a.speed >= 0.0) {
                return Err(invalid(format!("{p}.speed"), "must be non-negative"));
            }
            for (j, c) in a.script.iter().enumerate() {
                let cp = format!("{p}.script[{j}]");
                check_finite(&format!("{cp}.t"), c.t)?;
                if let Some(v) = c.speed {
                    if !(v >= 0.0) {
                        return Err(invalid(format!("{cp}.speed"), "must be non-negative"));
                    }
                }
                if let Some(r) = c.accel {
                    if !(r > 0.0) {
                        return Err(invalid(format!("{cp}.accel"), "must be positive"));
                    }
                }
                if let Some(l) = c.lane {
                    lane_len(&format!("{cp}.lane"), l)?;
                    if !matches!(route, AgentRoute::Lane { .. }) {
                        return Err(invalid(format!("{cp}.lane"), "lane changes need a lane-following agent"));
                    }
                }
                if j > 0 && c.t < a.script[j - 1].t {
                    return Err(invalid(format!("{cp}.t"), "commands must be in time order"));
                }
            }
            let (hl, hw) = default_extents(a.kind);
            agents.push(AgentSpec {
                id: a.id,
                kind: a.kind,
                route,
                speed: a.speed,
                half_length: a.half_length.unwrap_or(hl),
                half_width: a.half_width.unwrap_or(hw),
                script: a.script.clone(),
            });
        }

        let limits = doc.limits.unwrap_or_default();
        if !(limits.max_sim_time_s > 0.0 && limits.max_wall_time_s > 0.0) {
            return Err(invalid("limits", "time limits must be positive"));
        }

        Ok(Scenario {
            name: doc.name.clone(),
            seed: doc.seed,
            lanes: graph,
            lights,
            ego,
            route,
            target_speed: doc.target_speed,
            navigation: doc.navigation.clone(),
            agents,
            limits,
        })
    }

    /// Initial ego state on its spawn lane.
    pub fn ego_state(&self) -> super::vehicle::VehicleState {
        let lane = self.lanes.lane(self.ego.lane).expect("validated spawn lane");
        let mut v = super::vehicle::VehicleState::new(
            lane.centerline.point_at(self.ego.s),
            lane.centerline.heading_at(self.ego.s),
            self.ego.speed,
        );
        v.wheelbase = self.ego.wheelbase;
        v.half_length = self.ego.half_length;
        v.half_width = self.ego.half_width;
        v
    }
}
