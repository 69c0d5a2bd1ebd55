//! World state, scripted agents, snapshots and infraction detection.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::lane::{LaneId, Polyline};
use super::scenario::{AgentKind, AgentRoute, AgentSpec, LightPhase, Scenario, EGO_ID};
use super::vehicle::{step_vehicle, Control, VehicleLimits, VehicleState};
use crate::geometry::OrientedBox;
use crate::math::Vec2;

/// Lateral tolerance past a lane edge before the ego counts as off-road.
pub const OFF_ROAD_MARGIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccidentKind {
    CollisionVehicle,
    CollisionPedestrian,
    CollisionStatic,
    OffRoad,
    RedLightViolation,
}

impl AccidentKind {
    pub fn is_collision(self) -> bool {
        matches!(self, Self::CollisionVehicle | Self::CollisionPedestrian | Self::CollisionStatic)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::CollisionVehicle => "collision_vehicle",
            Self::CollisionPedestrian => "collision_pedestrian",
            Self::CollisionStatic => "collision_static",
            Self::OffRoad => "off_road",
            Self::RedLightViolation => "red_light_violation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccidentInfo {
    pub kind: AccidentKind,
    pub timestep: u64,
    pub time: f64,
    /// Agent ids for collisions, the light id for red-light violations.
    pub objects: Vec<u32>,
    pub location: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LaneChange {
    lateral0: f64,
    start: f64,
    duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Agent {
    spec: AgentSpec,
    lane: Option<LaneId>,
    s: f64,
    speed: f64,
    target_speed: f64,
    rate: Option<f64>,
    next_cmd: usize,
    lane_change: Option<LaneChange>,
    position: Vec2,
    heading: f64,
}

/// Immutable view of one actor in a snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorSnapshot {
    pub id: u32,
    pub kind: AgentKind,
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl ActorSnapshot {
    pub fn velocity(&self) -> Vec2 {
        Vec2::from_angle(self.heading) * self.speed
    }

    pub fn footprint(&self) -> OrientedBox {
        OrientedBox::new(self.position, self.heading, self.half_length, self.half_width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightSnapshot {
    pub id: u32,
    pub lane: LaneId,
    pub stop_s: f64,
    pub stop_point: Vec2,
    pub heading: f64,
    pub phase: LightPhase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopSignSnapshot {
    pub lane: LaneId,
    pub stop_s: f64,
    pub stop_point: Vec2,
    pub heading: f64,
}

/// Everything perception may look at for one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSnapshot {
    pub tick: u64,
    pub time: f64,
    pub ego_id: u32,
    pub ego: VehicleState,
    pub actors: Vec<ActorSnapshot>,
    pub lights: Vec<LightSnapshot>,
    pub stop_signs: Vec<StopSignSnapshot>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    scenario: Scenario,
    limits: VehicleLimits,
    tick: u64,
    time: f64,
    ego: VehicleState,
    prev_ego: Option<VehicleState>,
    agents: Vec<Agent>,
}

impl World {
    pub fn new(scenario: Scenario) -> Self {
        let ego = scenario.ego_state();
        let mut agents: Vec<Agent> = scenario
            .agents
            .iter()
            .map(|spec| {
                let (lane, s) = match &spec.route {
                    AgentRoute::Lane { lane, s } => (Some(*lane), *s),
                    AgentRoute::Path { s, .. } => (None, *s),
                };
                Agent {
                    spec: spec.clone(),
                    lane,
                    s,
                    speed: spec.speed,
                    target_speed: spec.speed,
                    rate: None,
                    next_cmd: 0,
                    lane_change: None,
                    position: Vec2::ZERO,
                    heading: 0.0,
                }
            })
            .collect();
        for a in &mut agents {
            apply_commands(a, 0.0, &scenario);
            update_pose(a, 0.0, &scenario);
        }
        Self { scenario, limits: VehicleLimits::default(), tick: 0, time: 0.0, ego, prev_ego: None, agents }
    }

    pub fn with_limits(mut self, limits: VehicleLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn limits(&self) -> &VehicleLimits {
        &self.limits
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn ego(&self) -> &VehicleState {
        &self.ego
    }

    /// Replaces the ego state (used by tests and scripted set-ups).
    pub fn set_ego(&mut self, ego: VehicleState) {
        self.ego = ego;
    }

    /// Advances ego and agents by `dt`.
    pub fn step(&mut self, control: Control, dt: f64) {
        self.prev_ego = Some(self.ego);
        self.ego = step_vehicle(&self.ego, control, dt, &self.limits);
        self.time += dt;
        self.tick += 1;
        let t = self.time;
        for a in &mut self.agents {
            advance_agent(a, dt, t, &self.scenario);
        }
    }

    pub fn light_phase(&self, id: u32) -> Option<LightPhase> {
        self.scenario
            .lights
            .iter()
            .find(|l| l.id == id)
            .map(|l| l.phase_at(self.time, self.scenario.seed))
    }

    pub fn snapshot(&self) -> WorldSnapshot {
        let actors = self
            .agents
            .iter()
            .map(|a| ActorSnapshot {
                id: a.spec.id,
                kind: a.spec.kind,
                position: a.position,
                heading: a.heading,
                speed: a.speed,
                half_length: a.spec.half_length,
                half_width: a.spec.half_width,
            })
            .collect();
        let graph = &self.scenario.lanes;
        let lights = self
            .scenario
            .lights
            .iter()
            .filter_map(|l| {
                let lane = graph.lane(l.lane)?;
                Some(LightSnapshot {
                    id: l.id,
                    lane: l.lane,
                    stop_s: l.stop_s,
                    stop_point: lane.centerline.point_at(l.stop_s),
                    heading: lane.centerline.heading_at(l.stop_s),
                    phase: l.phase_at(self.time, self.scenario.seed),
                })
            })
            .collect();
        let stop_signs = graph
            .lanes()
            .iter()
            .filter_map(|lane| {
                let s = lane.stop_sign_s?;
                Some(StopSignSnapshot {
                    lane: lane.id,
                    stop_s: s,
                    stop_point: lane.centerline.point_at(s),
                    heading: lane.centerline.heading_at(s),
                })
            })
            .collect();
        WorldSnapshot {
            tick: self.tick,
            time: self.time,
            ego_id: EGO_ID,
            ego: self.ego,
            actors,
            lights,
            stop_signs,
        }
    }

    /// First infraction of the current tick: collision, then red light, then off-road.
    pub fn detect_accident(&self) -> Option<AccidentInfo> {
        let fp = self.ego.footprint();
        for a in &self.agents {
            let other = OrientedBox::new(a.position, a.heading, a.spec.half_length, a.spec.half_width);
            if fp.overlaps(&other) {
                let kind = match a.spec.kind {
                    AgentKind::Vehicle | AgentKind::Cyclist => AccidentKind::CollisionVehicle,
                    AgentKind::Pedestrian => AccidentKind::CollisionPedestrian,
                    AgentKind::Static => AccidentKind::CollisionStatic,
                };
                return Some(self.accident(kind, alloc::vec![a.spec.id]));
            }
        }
        if let Some(prev) = &self.prev_ego {
            for light in &self.scenario.lights {
                if light.phase_at(self.time, self.scenario.seed) != LightPhase::Red {
                    continue;
                }
                let Some(lane) = self.scenario.lanes.lane(light.lane) else { continue };
                let now = lane.centerline.project(self.ego.position);
                let before = lane.centerline.project(prev.position);
                if now.distance > lane.width / 2.0 {
                    continue;
                }
                let front_now = now.s + self.ego.half_length;
                let front_before = before.s + prev.half_length;
                if front_before < light.stop_s && front_now >= light.stop_s {
                    return Some(self.accident(AccidentKind::RedLightViolation, alloc::vec![light.id]));
                }
            }
        }
        if self.scenario.lanes.boundary_excess(self.ego.position) > OFF_ROAD_MARGIN {
            return Some(self.accident(AccidentKind::OffRoad, Vec::new()));
        }
        None
    }

    fn accident(&self, kind: AccidentKind, objects: Vec<u32>) -> AccidentInfo {
        AccidentInfo { kind, timestep: self.tick, time: self.time, objects, location: self.ego.position }
    }
}

fn apply_commands(a: &mut Agent, t: f64, scenario: &Scenario) {
    while let Some(cmd) = a.spec.script.get(a.next_cmd) {
        if cmd.t > t + 1e-9 {
            break;
        }
        if let Some(v) = cmd.speed {
            a.target_speed = v;
            a.rate = cmd.accel;
            if a.rate.is_none() {
                a.speed = v;
            }
        }
        if let (Some(to), Some(from)) = (cmd.lane, a.lane) {
            if to != from {
                if let Some(target) = scenario.lanes.lane(to) {
                    let proj = target.centerline.project(a.position);
                    a.lane = Some(to);
                    a.s = proj.s;
                    a.lane_change = Some(LaneChange {
                        lateral0: proj.lateral,
                        start: cmd.t,
                        duration: cmd.lane_change_s.max(1e-3),
                    });
                }
            }
        }
        a.next_cmd += 1;
    }
}

fn advance_agent(a: &mut Agent, dt: f64, t: f64, scenario: &Scenario) {
    let v0 = a.speed;
    if let Some(rate) = a.rate {
        let dv = a.target_speed - a.speed;
        let step = rate * dt;
        a.speed = if dv.abs() <= step { a.target_speed } else { a.speed + step * dv.signum() };
    }
    a.s += 0.5 * (v0 + a.speed) * dt;
    match (&a.spec.route, a.lane) {
        (AgentRoute::Lane { .. }, Some(lane_id)) => {
            if let Some(lane) = scenario.lanes.lane(lane_id) {
                let len = lane.length();
                if a.s > len {
                    if let Some(&next) = lane.successors.first() {
                        a.s -= len;
                        a.lane = Some(next);
                    }
                }
            }
        }
        (AgentRoute::Path { path, .. }, _) => {
            if a.s >= path.length() {
                a.s = path.length();
                a.speed = 0.0;
                a.target_speed = 0.0;
            }
        }
        _ => {}
    }
    apply_commands(a, t, scenario);
    update_pose(a, t, scenario);
}

fn update_pose(a: &mut Agent, t: f64, scenario: &Scenario) {
    let (line, s): (&Polyline, f64) = match (&a.spec.route, a.lane) {
        (AgentRoute::Path { path, .. }, _) => (path, a.s),
        (AgentRoute::Lane { .. }, Some(lane)) => match scenario.lanes.lane(lane) {
            Some(l) => (&l.centerline, a.s),
            None => return,
        },
        _ => return,
    };
    let base = line.point_at(s);
    let tangent = line.tangent_at(s);
    let mut lateral = 0.0;
    let mut heading = tangent.angle();
    if let Some(lc) = a.lane_change {
        let u = ((t - lc.start) / lc.duration).clamp(0.0, 1.0);
        let blend = 1.0 - u * u * (3.0 - 2.0 * u);
        lateral = lc.lateral0 * blend;
        let dblend = -6.0 * u * (1.0 - u) / lc.duration;
        if a.speed > 0.1 {
            heading += crate::math::atan2(lc.lateral0 * dblend, a.speed);
        }
        if u >= 1.0 {
            a.lane_change = None;
        }
    }
    a.position = base + tangent.perp() * lateral;
    a.heading = heading;
}

/// Fraction of the route covered by the ego's projection onto the dense path.
pub fn route_progress(route: &Polyline, ego_position: Vec2) -> f64 {
    let len = route.length();
    if route.len() < 2 || len <= 0.0 {
        return 0.0;
    }
    (route.project(ego_position).s / len).clamp(0.0, 1.0)
}

/// Max-so-far wrapper around [`route_progress`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ProgressTracker {
    best: f64,
}

impl ProgressTracker {
    pub fn update(&mut self, route: &Polyline, ego_position: Vec2) -> f64 {
        self.best = self.best.max(route_progress(route, ego_position));
        self.best
    }

    pub fn value(&self) -> f64 {
        self.best
    }
}
