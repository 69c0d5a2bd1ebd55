//! Reasoner backends and the decision protocol around them.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prompts::PromptSet;
use super::{MetaAction, NavManeuver, NavigationHint};
use crate::perceiver::{CriticalObject, LaneRelation, SceneDescription, Semantic};
use crate::sim::scenario::LightPhase;

/// A retrieved experience shown to the backend as an example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shot {
    pub description: SceneDescription,
    pub reasoning: String,
    pub decision: MetaAction,
    pub similarity: f64,
}

/// Everything a backend sees for one decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub system: String,
    pub prompt: String,
    pub shots: Vec<Shot>,
    pub description: SceneDescription,
    pub nav: NavigationHint,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum BackendError {
    #[error("backend timed out after {0} ms")]
    Timeout(u64),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend error: {0}")]
    Other(String),
}

/// Text-in, text-out reasoning model.
pub trait ReasonerBackend {
    fn name(&self) -> &str;
    fn complete(&self, request: &DecisionRequest) -> Result<String, BackendError>;
}

impl<B: ReasonerBackend + ?Sized> ReasonerBackend for &B {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn complete(&self, request: &DecisionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<B: ReasonerBackend + ?Sized> ReasonerBackend for alloc::boxed::Box<B> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn complete(&self, request: &DecisionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub reasoning: String,
    pub action: MetaAction,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecideError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("unusable backend output ({reason}): {raw:?}")]
    InvalidOutput { raw: String, reason: String },
}

/// Extracts reasoning and the action from the last `Decision:` line.
pub fn parse_decision(raw: &str) -> Result<Decision, DecideError> {
    let invalid = |reason: &str| DecideError::InvalidOutput { raw: raw.into(), reason: reason.into() };
    let lines: Vec<&str> = raw.lines().collect();
    let (idx, rest) = lines
        .iter()
        .enumerate()
        .rev()
        .find_map(|(i, l)| {
            let t = l.trim().trim_start_matches(['*', '#', '-', ' ']);
            let lower = t.to_ascii_lowercase();
            lower.starts_with("decision:").then(|| (i, &t["decision:".len()..]))
        })
        .ok_or_else(|| invalid("no Decision line"))?;
    let action: MetaAction = rest.parse().map_err(|_| invalid("unknown action"))?;
    let mut reasoning = String::new();
    for (i, l) in lines.iter().enumerate() {
        if i == idx {
            continue;
        }
        let t = l.trim();
        let t = t.strip_prefix("Reasoning:").map(str::trim).unwrap_or(t);
        if t.is_empty() {
            continue;
        }
        if !reasoning.is_empty() {
            reasoning.push(' ');
        }
        reasoning.push_str(t);
    }
    Ok(Decision { reasoning, action, raw: raw.into() })
}

fn render_nav(s: &mut String, nav: &NavigationHint) {
    let _ = writeln!(
        s,
        "Navigation: {} in {:.1} m; target speed {:.1} m/s.",
        nav.maneuver.as_str(),
        nav.distance,
        nav.target_speed
    );
}

/// Prompt layout: traffic rules, retrieved examples, then the current scene
/// with navigation and ego state.
pub fn render_context(rules: &str, shots: &[Shot], d: &SceneDescription, nav: &NavigationHint) -> String {
    let mut s = String::new();
    s.push_str(rules.trim_end());
    s.push_str("\n\n");
    if !shots.is_empty() {
        s.push_str("## Past experiences\n");
        for (i, shot) in shots.iter().enumerate() {
            let _ = writeln!(s, "### Experience {} (similarity {:.3})", i + 1, shot.similarity);
            let _ = writeln!(s, "Scene: {}", shot.description.summary);
            let _ = writeln!(s, "Reasoning: {}", shot.reasoning);
            let _ = writeln!(s, "Action: {}", shot.decision);
        }
        s.push('\n');
    }
    s.push_str("## Current scene\n");
    s.push_str(&d.summary);
    s.push('\n');
    render_nav(&mut s, nav);
    let _ = writeln!(s, "Ego: speed {:.1} m/s, acceleration {:+.1} m/s^2.", d.ego.speed, d.ego.accel);
    s
}

fn request(prompts: &PromptSet, shots: Vec<Shot>, d: &SceneDescription, nav: &NavigationHint) -> DecisionRequest {
    DecisionRequest {
        system: prompts.system.clone(),
        prompt: render_context(&prompts.traffic_rules, &shots, d, nav),
        shots,
        description: d.clone(),
        nav: *nav,
    }
}

/// Slow path: one backend call on the bare context.
pub fn analytic_decide<B: ReasonerBackend + ?Sized>(
    backend: &B,
    prompts: &PromptSet,
    d: &SceneDescription,
    nav: &NavigationHint,
) -> Result<Decision, DecideError> {
    let req = request(prompts, Vec::new(), d, nav);
    parse_decision(&backend.complete(&req)?)
}

/// Fast path: the backend sees retrieved experiences as few-shot examples.
pub fn heuristic_decide<B: ReasonerBackend + ?Sized>(
    backend: &B,
    prompts: &PromptSet,
    shots: Vec<Shot>,
    d: &SceneDescription,
    nav: &NavigationHint,
) -> Result<Decision, DecideError> {
    let req = request(prompts, shots, d, nav);
    parse_decision(&backend.complete(&req)?)
}

/// Thresholds of the rule table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleParams {
    /// Red lights, stop signs and pedestrians in the path within this
    /// distance require STOP (m).
    pub stop_distance: f64,
    pub ttc: f64,
    pub min_gap: f64,
    pub lc_front_gap: f64,
    pub lc_rear_gap: f64,
    /// Lane changes are taken once the requested maneuver is this close (m).
    pub lc_trigger: f64,
    pub speed_margin: f64,
    /// Same-lane traffic closer than this blocks acceleration (m).
    pub clear_distance: f64,
    /// A yellow light requires STOP when stopping needs at most this
    /// deceleration (m/s^2).
    pub yellow_decel: f64,
    /// Within this distance of a stop sign the ego may pull away once slower
    /// than `stop_sign_release_speed`.
    pub stop_sign_hold: f64,
    pub stop_sign_release_speed: f64,
}

impl Default for RuleParams {
    fn default() -> Self {
        Self {
            stop_distance: 25.0,
            ttc: 3.0,
            min_gap: 8.0,
            lc_front_gap: 15.0,
            lc_rear_gap: 10.0,
            lc_trigger: 20.0,
            speed_margin: 1.0,
            clear_distance: 30.0,
            yellow_decel: 4.0,
            stop_sign_hold: 3.0,
            stop_sign_release_speed: 3.0,
        }
    }
}

impl RuleParams {
    /// Late-reacting profile: decelerates only at short TTC or small gaps.
    pub fn reactive() -> Self {
        Self { ttc: 1.2, min_gap: 5.0, ..Self::default() }
    }
}

fn is_lead(o: &CriticalObject) -> bool {
    o.relation == LaneRelation::Same && o.is_ahead() && !o.semantic.is_traffic_control() && o.semantic != Semantic::Pedestrian
}

fn side_gaps(d: &SceneDescription, rel: LaneRelation) -> (f64, f64) {
    let mut front = f64::INFINITY;
    let mut rear = f64::INFINITY;
    for o in d.objects.iter().filter(|o| o.relation == rel && !o.semantic.is_traffic_control()) {
        if o.is_ahead() {
            front = front.min(o.distance);
        } else {
            rear = rear.min(o.distance);
        }
    }
    (front, rear)
}

/// Decision table over structured scene fields.
///
/// Priority: STOP, DC, lane change, AC, IDLE. Total over all inputs.
pub fn rule_decide(d: &SceneDescription, nav: &NavigationHint, p: &RuleParams) -> (MetaAction, String) {
    let v = d.ego.speed;
    for o in &d.objects {
        if !o.is_ahead() || o.distance > p.stop_distance {
            continue;
        }
        match o.semantic {
            Semantic::TrafficLight => match o.light_phase {
                Some(LightPhase::Red) => {
                    return (MetaAction::Stop, format!("Red light {:.1} m ahead; stop before the line.", o.distance));
                }
                Some(LightPhase::Yellow) if v * v <= 2.0 * p.yellow_decel * o.distance.max(0.01) => {
                    return (MetaAction::Stop, format!("Yellow light {:.1} m ahead and stopping is comfortable; stop.", o.distance));
                }
                _ => {}
            },
            Semantic::StopSign => {
                if o.distance > p.stop_sign_hold || v > p.stop_sign_release_speed {
                    return (MetaAction::Stop, format!("Stop sign {:.1} m ahead; stop at the line.", o.distance));
                }
            }
            Semantic::Pedestrian if matches!(o.relation, LaneRelation::Same | LaneRelation::Crossing) => {
                return (MetaAction::Stop, format!("Pedestrian in the path {:.1} m ahead; yield.", o.distance));
            }
            _ => {}
        }
    }

    let lead = d.objects.iter().filter(|o| is_lead(o)).min_by(|a, b| a.distance.total_cmp(&b.distance));
    if let Some(l) = lead {
        if l.distance < p.min_gap {
            return (MetaAction::Dc, format!("{} ahead only {:.1} m away; slow down.", l.semantic.as_str(), l.distance));
        }
        if let Some(ttc) = l.ttc() {
            if ttc < p.ttc {
                return (
                    MetaAction::Dc,
                    format!("{} ahead closing at {:.1} m/s, time to collision {:.1} s; slow down.", l.semantic.as_str(), l.closing_speed, ttc),
                );
            }
        }
    }

    if nav.distance <= p.lc_trigger {
        let (want, rel, avail) = match nav.maneuver {
            NavManeuver::LaneChangeLeft => (Some(MetaAction::Lcl), LaneRelation::Left, d.ego.lanes_left > 0),
            NavManeuver::LaneChangeRight => (Some(MetaAction::Lcr), LaneRelation::Right, d.ego.lanes_right > 0),
            _ => (None, LaneRelation::Same, false),
        };
        if let Some(a) = want {
            let (front, rear) = side_gaps(d, rel);
            if avail && front >= p.lc_front_gap && rear >= p.lc_rear_gap {
                return (a, format!("Navigation asks to {}; the target lane is free.", nav.maneuver.as_str()));
            }
        }
    }

    let blocked = lead.is_some_and(|l| l.distance < p.clear_distance && l.closing_speed > -0.2);
    if v < nav.target_speed - p.speed_margin && !blocked {
        return (MetaAction::Ac, format!("Road ahead is clear and speed {v:.1} m/s is below the target {:.1} m/s.", nav.target_speed));
    }
    (MetaAction::Idle, String::from("No hazard requires a change; keep the current speed."))
}

fn answer(reasoning: &str, action: MetaAction) -> String {
    format!("Reasoning: {reasoning}\nDecision: {action}")
}

/// Deterministic stand-in for the analytic model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RuleOracle {
    pub params: RuleParams,
}

impl ReasonerBackend for RuleOracle {
    fn name(&self) -> &str {
        "rule-oracle"
    }

    fn complete(&self, req: &DecisionRequest) -> Result<String, BackendError> {
        let (a, r) = rule_decide(&req.description, &req.nav, &self.params);
        Ok(answer(&r, a))
    }
}

/// Deterministic stand-in for the fast model: follows the most similar
/// example when it is close and describes an analogous situation, otherwise
/// reacts late with [`RuleParams::reactive`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotRuleModel {
    pub params: RuleParams,
    pub adopt_similarity: f64,
}

impl Default for FewShotRuleModel {
    fn default() -> Self {
        Self { params: RuleParams::reactive(), adopt_similarity: 0.9 }
    }
}

/// Same nearest-object category and lane relation (or both empty).
pub fn analogous(a: &SceneDescription, b: &SceneDescription) -> bool {
    match (a.nearest(), b.nearest()) {
        (None, None) => true,
        (Some(x), Some(y)) => x.semantic == y.semantic && x.relation == y.relation,
        _ => false,
    }
}

impl ReasonerBackend for FewShotRuleModel {
    fn name(&self) -> &str {
        "few-shot-rule-model"
    }

    fn complete(&self, req: &DecisionRequest) -> Result<String, BackendError> {
        if let Some(top) = req.shots.first() {
            if top.similarity >= self.adopt_similarity && analogous(&top.description, &req.description) {
                let r = format!("Matches a past experience (similarity {:.3}): {}", top.similarity, top.reasoning);
                return Ok(answer(&r, top.decision));
            }
        }
        let (a, r) = rule_decide(&req.description, &req.nav, &self.params);
        Ok(answer(&r, a))
    }
}
