//! Ground-truth scene description.
//!
//! Builds the structured critical-object list (semantic, spatial, motion and
//! reasoning attributes) from a window of world snapshots, plus a
//! deterministic text rendering of it.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::OrientedBox;
use crate::math::{Vec2, PI};
use crate::sim::lane::{LaneGraph, LaneId};
use crate::sim::scenario::{AgentKind, LightPhase};
use crate::sim::world::{ActorSnapshot, WorldSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Semantic {
    Vehicle,
    Cyclist,
    Pedestrian,
    TrafficLight,
    StopSign,
    Static,
}

impl Semantic {
    pub fn as_str(self) -> &'static str {
        match self {
            Semantic::Vehicle => "vehicle",
            Semantic::Cyclist => "cyclist",
            Semantic::Pedestrian => "pedestrian",
            Semantic::TrafficLight => "traffic_light",
            Semantic::StopSign => "stop_sign",
            Semantic::Static => "static",
        }
    }

    pub fn is_traffic_control(self) -> bool {
        matches!(self, Semantic::TrafficLight | Semantic::StopSign)
    }
}

impl From<AgentKind> for Semantic {
    fn from(k: AgentKind) -> Self {
        match k {
            AgentKind::Vehicle => Semantic::Vehicle,
            AgentKind::Cyclist => Semantic::Cyclist,
            AgentKind::Pedestrian => Semantic::Pedestrian,
            AgentKind::Static => Semantic::Static,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneRelation {
    Same,
    Left,
    Right,
    Oncoming,
    Crossing,
}

impl LaneRelation {
    pub fn as_str(self) -> &'static str {
        match self {
            LaneRelation::Same => "same lane",
            LaneRelation::Left => "left lane",
            LaneRelation::Right => "right lane",
            LaneRelation::Oncoming => "oncoming",
            LaneRelation::Crossing => "crossing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Approaching,
    Receding,
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    SameDirection,
    Opposite,
    CrossingLeftward,
    CrossingRightward,
    Stationary,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::SameDirection => "moving in the same direction",
            Direction::Opposite => "moving in the opposite direction",
            Direction::CrossingLeftward => "crossing towards the left",
            Direction::CrossingRightward => "crossing towards the right",
            Direction::Stationary => "stationary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasonTag {
    MustStopAtIntersection,
    PrepareToStop,
    ProceedWithCaution,
    MustStopAtStopSign,
    YieldToPedestrian,
    LeadClosing,
    FollowLead,
    ObstacleInLane,
    AdjacentTraffic,
    OncomingTraffic,
    CrossingTraffic,
}

impl ReasonTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ReasonTag::MustStopAtIntersection => "must stop at intersection",
            ReasonTag::PrepareToStop => "prepare to stop",
            ReasonTag::ProceedWithCaution => "proceed with caution",
            ReasonTag::MustStopAtStopSign => "must stop at stop sign",
            ReasonTag::YieldToPedestrian => "pedestrian in path, yield",
            ReasonTag::LeadClosing => "lead closing, keep distance",
            ReasonTag::FollowLead => "follow lead",
            ReasonTag::ObstacleInLane => "obstacle in lane",
            ReasonTag::AdjacentTraffic => "adjacent traffic, check before lane change",
            ReasonTag::OncomingTraffic => "oncoming traffic",
            ReasonTag::CrossingTraffic => "crossing traffic, yield",
        }
    }
}

/// Box in the ego frame: x forward, y left, heading relative to the ego.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoFrameBox {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalObject {
    pub id: u32,
    pub semantic: Semantic,
    pub bbox: EgoFrameBox,
    pub relation: LaneRelation,
    /// Free-space gap to the ego footprint, or arc distance to a stop line.
    pub distance: f64,
    pub direction: Direction,
    /// Positive when the gap shrinks (m/s).
    pub closing_speed: f64,
    pub trend: Trend,
    pub speed: f64,
    pub reasoning: ReasonTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub light_phase: Option<LightPhase>,
}

impl CriticalObject {
    pub fn is_ahead(&self) -> bool {
        self.bbox.x > 0.0
    }

    /// Time to collision along the line of sight, if closing.
    pub fn ttc(&self) -> Option<f64> {
        (self.closing_speed > 0.0).then(|| self.distance / self.closing_speed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoContext {
    pub speed: f64,
    pub accel: f64,
    pub lane: Option<LaneId>,
    pub lanes_left: u8,
    pub lanes_right: u8,
    pub junction_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub frame: u64,
    pub objects: Vec<CriticalObject>,
    pub ego: EgoContext,
    pub summary: String,
}

impl SceneDescription {
    pub fn nearest(&self) -> Option<&CriticalObject> {
        self.objects.first()
    }
}

/// Radii of the criticality rules (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CriticalityRadii {
    pub ahead: f64,
    pub oncoming: f64,
    pub crossing: f64,
    pub traffic_control: f64,
    /// Approaching traffic behind in the same or adjacent lanes.
    pub rear: f64,
}

impl Default for CriticalityRadii {
    fn default() -> Self {
        Self { ahead: 60.0, oncoming: 40.0, crossing: 30.0, traffic_control: 50.0, rear: 30.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerceiverConfig {
    pub radii: CriticalityRadii,
    /// Closing speeds below this magnitude count as static (m/s).
    pub static_speed: f64,
    pub window: usize,
}

impl Default for PerceiverConfig {
    fn default() -> Self {
        Self { radii: CriticalityRadii::default(), static_speed: 0.2, window: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerceiveError {
    #[error("empty snapshot window")]
    EmptyWindow,
    #[error("unknown ego id {0}")]
    UnknownEgo(u32),
    #[error("external perceiver failed: {0}")]
    Backend(String),
}

/// Source of scene descriptions; the ground-truth describer is built in.
pub trait SceneDescriber {
    fn describe(&self, window: &[WorldSnapshot], graph: &LaneGraph, ego_id: u32) -> Result<SceneDescription, PerceiveError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruthPerceiver {
    pub config: PerceiverConfig,
}

impl SceneDescriber for GroundTruthPerceiver {
    fn describe(&self, window: &[WorldSnapshot], graph: &LaneGraph, ego_id: u32) -> Result<SceneDescription, PerceiveError> {
        describe_scene(window, graph, ego_id, &self.config)
    }
}

/// Keeps objects matched by at least one criticality rule.
pub fn criticality_filter(objects: Vec<CriticalObject>, radii: &CriticalityRadii) -> Vec<CriticalObject> {
    objects.into_iter().filter(|o| is_critical(o, radii)).collect()
}

fn is_critical(o: &CriticalObject, r: &CriticalityRadii) -> bool {
    let ahead = o.is_ahead();
    if !ahead && o.trend == Trend::Receding {
        return false;
    }
    if o.semantic.is_traffic_control() {
        return ahead && o.distance <= r.traffic_control;
    }
    match o.relation {
        LaneRelation::Same | LaneRelation::Left | LaneRelation::Right => {
            if ahead {
                o.distance <= r.ahead
            } else {
                o.trend == Trend::Approaching && o.distance <= r.rear
            }
        }
        LaneRelation::Oncoming => o.distance <= r.oncoming,
        LaneRelation::Crossing => o.distance <= r.crossing,
    }
}

fn reason_for(semantic: Semantic, relation: LaneRelation, trend: Trend, phase: Option<LightPhase>) -> ReasonTag {
    match semantic {
        Semantic::TrafficLight => match phase {
            Some(LightPhase::Red) => ReasonTag::MustStopAtIntersection,
            Some(LightPhase::Yellow) => ReasonTag::PrepareToStop,
            _ => ReasonTag::ProceedWithCaution,
        },
        Semantic::StopSign => ReasonTag::MustStopAtStopSign,
        Semantic::Pedestrian if matches!(relation, LaneRelation::Same | LaneRelation::Crossing) => {
            ReasonTag::YieldToPedestrian
        }
        _ => match relation {
            LaneRelation::Same if semantic == Semantic::Static => ReasonTag::ObstacleInLane,
            LaneRelation::Same if trend == Trend::Approaching => ReasonTag::LeadClosing,
            LaneRelation::Same => ReasonTag::FollowLead,
            LaneRelation::Left | LaneRelation::Right => ReasonTag::AdjacentTraffic,
            LaneRelation::Oncoming => ReasonTag::OncomingTraffic,
            LaneRelation::Crossing => ReasonTag::CrossingTraffic,
        },
    }
}

fn trend_of(closing: f64, threshold: f64) -> Trend {
    if closing.abs() < threshold {
        Trend::Static
    } else if closing > 0.0 {
        Trend::Approaching
    } else {
        Trend::Receding
    }
}

/// Least-squares slope of `ys` against `ts`.
fn slope(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let mt = ts.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, y) in ts.iter().zip(ys) {
        num += (t - mt) * (y - my);
        den += (t - mt) * (t - mt);
    }
    if den > 0.0 { num / den } else { 0.0 }
}

/// Relative velocity of `id` with respect to the ego, from a linear fit of
/// relative position over the window, or from instantaneous velocities when
/// only one frame contains the actor.
fn relative_velocity(window: &[WorldSnapshot], latest: &ActorSnapshot) -> Vec2 {
    let mut ts = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for snap in window {
        if let Some(a) = snap.actors.iter().find(|a| a.id == latest.id) {
            let rel = a.position - snap.ego.position;
            ts.push(snap.time);
            xs.push(rel.x);
            ys.push(rel.y);
        }
    }
    if ts.len() < 2 {
        let ego = &window[window.len() - 1].ego;
        return latest.velocity() - ego.velocity();
    }
    Vec2::new(slope(&ts, &xs), slope(&ts, &ys))
}

fn classify_relation(
    graph: &LaneGraph,
    ego_lane: Option<LaneId>,
    lane_width: f64,
    actor: &ActorSnapshot,
    ego_heading: f64,
    local: Vec2,
    moving: bool,
) -> LaneRelation {
    let dh = crate::math::wrap_angle(actor.heading - ego_heading).abs();
    if moving && dh > 0.75 * PI {
        return LaneRelation::Oncoming;
    }
    if moving && dh > 0.25 * PI {
        return LaneRelation::Crossing;
    }
    let heading = moving.then_some(actor.heading);
    if let (Some(el), Some(am)) = (ego_lane, graph.locate(actor.position, heading)) {
        if am.lane == el {
            return LaneRelation::Same;
        }
        if side_chain(graph, el, am.lane, |l| l.left) {
            return LaneRelation::Left;
        }
        if side_chain(graph, el, am.lane, |l| l.right) {
            return LaneRelation::Right;
        }
    }
    if local.y.abs() <= lane_width / 2.0 {
        LaneRelation::Same
    } else if local.y > 0.0 {
        LaneRelation::Left
    } else {
        LaneRelation::Right
    }
}

fn side_chain(graph: &LaneGraph, from: LaneId, target: LaneId, next: impl Fn(&crate::sim::lane::Lane) -> Option<LaneId>) -> bool {
    let mut cur = graph.lane(from).and_then(&next);
    let mut hops = 0;
    while let Some(id) = cur {
        if id == target {
            return true;
        }
        hops += 1;
        if hops > graph.lanes().len() {
            break;
        }
        cur = graph.lane(id).and_then(&next);
    }
    false
}

/// Describes the latest snapshot of `window` from the ego's point of view.
pub fn describe_scene(
    window: &[WorldSnapshot],
    graph: &LaneGraph,
    ego_id: u32,
    cfg: &PerceiverConfig,
) -> Result<SceneDescription, PerceiveError> {
    let latest = window.last().ok_or(PerceiveError::EmptyWindow)?;
    if latest.ego_id != ego_id {
        return Err(PerceiveError::UnknownEgo(ego_id));
    }
    let ego = &latest.ego;
    let ego_fp = ego.footprint();
    let ego_match = graph.locate(ego.position, Some(ego.heading));
    let ego_lane = ego_match.map(|m| m.lane);
    let lane_width = ego_lane.and_then(|l| graph.lane(l)).map(|l| l.width).unwrap_or(3.5);
    let to_local = |p: Vec2| (p - ego.position).rotate(-ego.heading);

    let mut objects = Vec::new();
    for actor in &latest.actors {
        if actor.id == ego_id {
            continue;
        }
        let rel = actor.position - ego.position;
        let local = to_local(actor.position);
        let v_rel = relative_velocity(window, actor);
        let los = rel.normalized();
        let closing = -v_rel.dot(los);
        let trend = trend_of(closing, cfg.static_speed);
        let moving = actor.speed > cfg.static_speed;
        let relation = classify_relation(graph, ego_lane, lane_width, actor, ego.heading, local, moving);
        let dh = crate::math::wrap_angle(actor.heading - ego.heading);
        let direction = if !moving {
            Direction::Stationary
        } else if dh.abs() <= 0.25 * PI {
            Direction::SameDirection
        } else if dh.abs() >= 0.75 * PI {
            Direction::Opposite
        } else if dh > 0.0 {
            Direction::CrossingLeftward
        } else {
            Direction::CrossingRightward
        };
        let semantic = Semantic::from(actor.kind);
        objects.push(CriticalObject {
            id: actor.id,
            semantic,
            bbox: EgoFrameBox {
                x: local.x,
                y: local.y,
                heading: dh,
                length: 2.0 * actor.half_length,
                width: 2.0 * actor.half_width,
            },
            relation,
            distance: ego_fp.distance(&actor.footprint()),
            direction,
            closing_speed: closing,
            trend,
            speed: actor.speed,
            reasoning: reason_for(semantic, relation, trend, None),
            light_phase: None,
        });
    }

    // traffic controls on the ego lane or its direct successors
    if let Some(m) = ego_match {
        let lane = graph.lane(m.lane);
        let front_s = m.s + ego.half_length;
        let lane_len = lane.map(|l| l.length()).unwrap_or(0.0);
        let arc_to = |target_lane: LaneId, stop_s: f64| -> Option<f64> {
            if target_lane == m.lane {
                Some(stop_s - front_s)
            } else if lane.is_some_and(|l| l.successors.contains(&target_lane)) {
                Some(lane_len - front_s + stop_s)
            } else {
                None
            }
        };
        let approach = ego.speed;
        let mut control = |id: u32, semantic: Semantic, dist: f64, point: Vec2, heading: f64, phase: Option<LightPhase>| {
            let local = to_local(point);
            let trend = trend_of(approach, cfg.static_speed);
            objects.push(CriticalObject {
                id,
                semantic,
                bbox: EgoFrameBox {
                    x: local.x,
                    y: local.y,
                    heading: crate::math::wrap_angle(heading - ego.heading),
                    length: 0.5,
                    width: lane_width,
                },
                relation: LaneRelation::Same,
                distance: dist.max(0.0),
                direction: Direction::Stationary,
                closing_speed: approach,
                trend,
                speed: 0.0,
                reasoning: reason_for(semantic, LaneRelation::Same, trend, phase),
                light_phase: phase,
            });
        };
        for light in &latest.lights {
            if let Some(d) = arc_to(light.lane, light.stop_s) {
                if d >= 0.0 {
                    control(light.id, Semantic::TrafficLight, d, light.stop_point, light.heading, Some(light.phase));
                }
            }
        }
        for sign in &latest.stop_signs {
            if let Some(d) = arc_to(sign.lane, sign.stop_s) {
                if d >= 0.0 {
                    control(sign.lane, Semantic::StopSign, d, sign.stop_point, sign.heading, None);
                }
            }
        }
    }

    let mut objects = criticality_filter(objects, &cfg.radii);
    objects.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id)));

    let ego_ctx = EgoContext {
        speed: ego.speed,
        accel: ego.accel,
        lane: ego_lane,
        lanes_left: ego_lane.map(|l| graph.lanes_to_left(l)).unwrap_or(0),
        lanes_right: ego_lane.map(|l| graph.lanes_to_right(l)).unwrap_or(0),
        junction_distance: ego_match
            .and_then(|m| graph.lane(m.lane).map(|l| (l.length() - m.s - ego.half_length).max(0.0))),
    };
    let summary = render_summary(latest.tick, &objects, &ego_ctx);
    Ok(SceneDescription { frame: latest.tick, objects, ego: ego_ctx, summary })
}

/// Text rendering of a description's structured fields.
pub fn render_summary(frame: u64, objects: &[CriticalObject], ego: &EgoContext) -> String {
    let mut s = String::new();
    let lane = match ego.lane {
        Some(l) => format!("lane {l}"),
        None => String::from("no lane"),
    };
    let _ = write!(s, "Frame {frame}. Ego speed {:.1} m/s in {lane}", ego.speed);
    if let Some(j) = ego.junction_distance {
        let _ = write!(s, ", {j:.1} m to the next junction");
    }
    s.push_str(".\n");
    if objects.is_empty() {
        s.push_str("No critical objects in view.");
        return s;
    }
    for (i, o) in objects.iter().enumerate() {
        let trend = match o.trend {
            Trend::Approaching => "approaching",
            Trend::Receding => "receding",
            Trend::Static => "static",
        };
        let _ = write!(
            s,
            "{}. {} ({}), distance {:.1} m, {}, closing {:+.1} m/s ({trend}), box [{:.1}, {:.1}, {:.1}, {:.1}]",
            i + 1,
            o.semantic.as_str(),
            o.relation.as_str(),
            o.distance,
            o.direction.as_str(),
            o.closing_speed,
            o.bbox.x,
            o.bbox.y,
            o.bbox.length,
            o.bbox.width,
        );
        if let Some(p) = o.light_phase {
            let _ = write!(s, ", light {}", match p {
                LightPhase::Red => "red",
                LightPhase::Yellow => "yellow",
                LightPhase::Green => "green",
            });
        }
        let _ = writeln!(s, ": {}.", o.reasoning.as_str());
    }
    if s.ends_with('\n') {
        s.pop();
    }
    s
}

/// Footprint of an ego-frame box in world coordinates.
pub fn bbox_world(b: &EgoFrameBox, ego_position: Vec2, ego_heading: f64) -> OrientedBox {
    OrientedBox::new(
        ego_position + Vec2::new(b.x, b.y).rotate(ego_heading),
        ego_heading + b.heading,
        b.length / 2.0,
        b.width / 2.0,
    )
}
