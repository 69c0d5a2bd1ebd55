//! Episode log records and reports.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::config::{EpisodeConfig, Mode};
use crate::dual::{MetaAction, PromptHashes, ReviseReport};
use crate::math::Vec2;
use crate::sim::vehicle::Control;
use crate::sim::world::AccidentInfo;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionSource {
    Analytic,
    Heuristic,
    /// The backend failed and DC was substituted.
    Fallback,
}

/// One 2 Hz decision and what the controller did with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub tick: u64,
    pub time: f64,
    pub source: DecisionSource,
    pub decision: MetaAction,
    /// Action handed to the planner (differs when a lane change is unavailable).
    pub executed: MetaAction,
    pub reasoning: String,
    /// Bank index and similarity of each few-shot example.
    pub shots: Vec<(usize, f64)>,
    pub candidate: Option<usize>,
    /// Cost of the chosen candidate; `None` for an emergency stop.
    pub cost: Option<f64>,
    pub emergency: bool,
    pub route_progress: f64,
    pub speed: f64,
}

/// One planner candidate as written to the debug dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateDump {
    pub s: f64,
    pub s_d: f64,
    pub d: f64,
    pub lon_duration: f64,
    pub lat_duration: f64,
    pub jerk: f64,
    pub accel: f64,
    pub speed: f64,
    pub lateral: f64,
    pub obstacle: f64,
    /// `None` when the candidate is infeasible.
    pub total: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionTrace {
    pub accident_tick: u64,
    /// Tick of the corrected history step.
    pub corrected_tick: u64,
    pub step: usize,
    pub original: MetaAction,
    pub corrected: MetaAction,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "detail", rename_all = "snake_case")]
pub enum EndReason {
    RouteComplete,
    Collision,
    OffRoad,
    SimTimeLimit,
    WallTimeLimit,
    ScenarioError(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Start { scenario: String, seed: u64, episode: u64, mode: Mode, prompts: PromptHashes },
    Tick { tick: u64, time: f64, position: Vec2, heading: f64, speed: f64, control: Control, route_progress: f64 },
    Decision(DecisionTrace),
    Plan { tick: u64, action: MetaAction, candidates: Vec<CandidateDump> },
    Fallback { tick: u64, error: String },
    Accident(AccidentInfo),
    Reflection(ReflectionTrace),
    Warning { tick: u64, message: String },
    End { tick: u64, time: f64, route_progress: f64, reason: EndReason },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TimingStats {
    pub sim_time_s: f64,
    pub wall_time_s: f64,
    pub ticks: u64,
    pub decisions: usize,
    pub fallbacks: usize,
    /// Mean wall time per decision (s), as reported by the clock.
    pub mean_decision_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub scenario: String,
    pub seed: u64,
    pub episode: u64,
    pub rc: f64,
    pub is: f64,
    pub ds: f64,
    pub infractions: Vec<AccidentInfo>,
    pub decisions: Vec<DecisionTrace>,
    pub reflections: Vec<ReflectionTrace>,
    pub end: EndReason,
    pub timed_out: bool,
    pub timing: TimingStats,
    pub bank_inserted: usize,
    pub revise: Option<ReviseReport>,
    pub config: EpisodeConfig,
    pub prompts: PromptHashes,
}
