//! Closed-loop episode runner and the reflection loop.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use super::config::{BackendSpec, EpisodeConfig, Mode};
use super::log::{CandidateDump, DecisionSource, DecisionTrace, EndReason, EpisodeReport, LogRecord, ReflectionTrace, TimingStats};
use super::metrics::compute_metrics;
use crate::control::{
    densify, emergency_stop, lookahead_select, plan_with_debug, DensePath, FrenetState, LaneContext, ObstaclePrediction,
    PlanContext, PlanDebug, Tracker, Trajectory,
};
use crate::dual::{
    analytic_decide, heuristic_decide, CreatedAt, Decision, Experience, FewShotRuleModel, HistoryQueue, HistoryRecord,
    MemoryBank, MetaAction, NavManeuver, NavigationHint, PromptSet, Provenance, ReasonerBackend, Reflector,
    RuleOracle, RuleReflector, Shot,
};
use crate::encoder::{ego_vector, encode, intent_index, EncoderParams, FeatureSource, Rasterizer};
use crate::math::cos;
use crate::perceiver::{GroundTruthPerceiver, LaneRelation, SceneDescriber, SceneDescription, Semantic};
use crate::sim::scenario::{LightPhase, Scenario, EGO_ID};
use crate::sim::vehicle::Control;
use crate::sim::world::{AccidentKind, ProgressTracker, World, WorldSnapshot};
use crate::token::SceneToken;

/// Wall clock in seconds; only differences are used.
pub trait Clock {
    fn now(&self) -> f64;
}

/// A clock that never advances, so wall-time limits never trigger.
#[derive(Debug, Clone, Copy, Default)]
pub struct FrozenClock;

impl Clock for FrozenClock {
    fn now(&self) -> f64 {
        0.0
    }
}

/// The models an episode talks to.
#[derive(Clone, Copy)]
pub struct Backends<'a> {
    pub perceiver: &'a dyn SceneDescriber,
    pub analytic: &'a dyn ReasonerBackend,
    pub heuristic: &'a dyn ReasonerBackend,
    pub reflector: &'a dyn Reflector,
}

/// Owned rule-based backends built from a config; external backends are
/// substituted by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinBackends {
    pub perceiver: GroundTruthPerceiver,
    pub oracle: RuleOracle,
    pub fast: FewShotRuleModel,
    pub reflector: RuleReflector,
}

impl BuiltinBackends {
    pub fn from_config(cfg: &EpisodeConfig) -> Self {
        let adopt = match cfg.heuristic_backend {
            BackendSpec::FewShotRule { adopt_similarity } => adopt_similarity,
            _ => FewShotRuleModel::default().adopt_similarity,
        };
        Self {
            perceiver: GroundTruthPerceiver { config: cfg.perceiver },
            oracle: RuleOracle { params: cfg.rules },
            fast: FewShotRuleModel { adopt_similarity: adopt, ..FewShotRuleModel::default() },
            reflector: RuleReflector { params: cfg.rules },
        }
    }

    /// Rule oracle for the analytic process; for the heuristic process the
    /// oracle or the few-shot model according to the config.
    pub fn backends(&self, cfg: &EpisodeConfig) -> Backends<'_> {
        let pick = |spec: &BackendSpec| -> &dyn ReasonerBackend {
            match spec {
                BackendSpec::RuleOracle => &self.oracle,
                _ => &self.fast,
            }
        };
        Backends {
            perceiver: &self.perceiver,
            analytic: pick(&cfg.analytic_backend),
            heuristic: pick(&cfg.heuristic_backend),
            reflector: &self.reflector,
        }
    }
}

/// Read-only inputs shared by all episodes of a run.
#[derive(Clone, Copy)]
pub struct EpisodeContext<'a> {
    pub prompts: &'a PromptSet,
    pub encoder: &'a EncoderParams,
    pub backends: Backends<'a>,
    pub clock: &'a dyn Clock,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub report: EpisodeReport,
    pub log: Vec<LogRecord>,
    /// Experiences this episode inserted into the bank, in order.
    pub delta: Vec<Experience>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("the reflection loop needs reflection enabled")]
    ReflectionDisabled,
}

/// Distance kept to a stop line or pedestrian when stopping (m).
const STOP_LINE_MARGIN: f64 = 1.0;
const PEDESTRIAN_MARGIN: f64 = 3.0;

struct Navigator {
    commands: Vec<(f64, NavManeuver, bool)>,
    route_length: f64,
    target_speed: f64,
}

impl Navigator {
    fn new(scenario: &Scenario, route_length: f64) -> Self {
        let mut commands: Vec<_> = scenario.navigation.iter().map(|c| (c.at_s, c.maneuver, false)).collect();
        commands.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { commands, route_length, target_speed: scenario.target_speed }
    }

    fn active(&mut self, s: f64) -> Option<usize> {
        for (i, c) in self.commands.iter_mut().enumerate() {
            if c.2 {
                continue;
            }
            // junction turns are informational and expire once passed
            if matches!(c.1, NavManeuver::Straight | NavManeuver::Left | NavManeuver::Right) && s > c.0 {
                c.2 = true;
                continue;
            }
            return Some(i);
        }
        None
    }

    fn hint(&mut self, s: f64) -> NavigationHint {
        match self.active(s) {
            Some(i) => {
                let (at, m, _) = self.commands[i];
                NavigationHint { maneuver: m, distance: (at - s).max(0.0), target_speed: self.target_speed }
            }
            None => NavigationHint {
                maneuver: NavManeuver::Straight,
                distance: (self.route_length - s).max(0.0),
                target_speed: self.target_speed,
            },
        }
    }

    fn complete_lane_change(&mut self, s: f64, meta: MetaAction) {
        let want = match meta {
            MetaAction::Lcl => NavManeuver::LaneChangeLeft,
            MetaAction::Lcr => NavManeuver::LaneChangeRight,
            _ => return,
        };
        if let Some(i) = self.active(s) {
            if self.commands[i].1 == want {
                self.commands[i].2 = true;
            }
        }
    }
}

fn stop_distance(d: &SceneDescription) -> Option<f64> {
    let ahead = || d.objects.iter().filter(|o| o.is_ahead());
    let control = ahead()
        .filter(|o| match o.semantic {
            Semantic::StopSign => true,
            Semantic::TrafficLight => matches!(o.light_phase, Some(LightPhase::Red | LightPhase::Yellow)),
            _ => false,
        })
        .map(|o| (o.distance - STOP_LINE_MARGIN).max(0.0));
    let walker = ahead()
        .filter(|o| o.semantic == Semantic::Pedestrian && matches!(o.relation, LaneRelation::Same | LaneRelation::Crossing))
        .map(|o| (o.distance - PEDESTRIAN_MARGIN).max(0.0));
    control.chain(walker).min_by(f64::total_cmp)
}

/// Constant-velocity predictions of all actors except same-direction
/// traffic entirely behind the ego.
fn obstacles(snap: &WorldSnapshot) -> Vec<ObstaclePrediction> {
    let ego = &snap.ego;
    snap.actors
        .iter()
        .filter(|a| {
            let local = (a.position - ego.position).rotate(-ego.heading);
            let behind = local.x + a.half_length < -ego.half_length;
            !(behind && cos(a.heading - ego.heading) > 0.0)
        })
        .map(|a| ObstaclePrediction { id: a.id, footprint: a.footprint(), velocity: a.velocity() })
        .collect()
}

fn lane_available(world: &World, path: &DensePath, s: f64, d: f64) -> bool {
    let p = path.to_world(s, d);
    let h = path.heading_at(s);
    world.scenario().lanes.locate(p, Some(h)).is_some_and(|m| {
        let lane_h = world.scenario().lanes.lane(m.lane).map(|l| l.centerline.heading_at(m.s)).unwrap_or(h);
        cos(lane_h - h) > 0.5 && m.lateral.abs() < 0.5
    })
}

struct Runner<'a, 'b> {
    cfg: &'a EpisodeConfig,
    ctx: &'a EpisodeContext<'b>,
    episode: u64,
    world: World,
    path: DensePath,
    raster: Rasterizer,
    nav: Navigator,
    window: VecDeque<WorldSnapshot>,
    history: HistoryQueue,
    tracker: Tracker,
    traj: Option<Trajectory>,
    d_ref: f64,
    planned_at: f64,
    progress: ProgressTracker,
    log: Vec<LogRecord>,
    decisions: Vec<DecisionTrace>,
    reflections: Vec<ReflectionTrace>,
    infractions: Vec<crate::sim::world::AccidentInfo>,
    delta: Vec<Experience>,
    fallbacks: usize,
    decision_wall: f64,
}

impl Runner<'_, '_> {
    fn warn(&mut self, message: String) {
        log::warn!("{message}");
        self.log.push(LogRecord::Warning { tick: self.world.tick(), message });
    }

    fn decide(&mut self, bank: &MemoryBank, desc: &SceneDescription, nav: &NavigationHint, token: &SceneToken) -> (Decision, DecisionSource, Vec<(usize, f64)>) {
        let b = &self.ctx.backends;
        let (result, source, shots) = match self.cfg.mode {
            Mode::Analytic => (analytic_decide(b.analytic, self.ctx.prompts, desc, nav), DecisionSource::Analytic, Vec::new()),
            Mode::Heuristic => {
                let top = match bank.retrieve_topk(token, self.cfg.k) {
                    Ok(t) => t,
                    Err(e) => {
                        self.warn(format!("retrieval failed: {e}"));
                        Vec::new()
                    }
                };
                let shots: Vec<Shot> = top
                    .iter()
                    .filter_map(|&(i, sim)| {
                        bank.get(i).map(|e| Shot {
                            description: e.description.clone(),
                            reasoning: e.reasoning.clone(),
                            decision: e.decision,
                            similarity: sim,
                        })
                    })
                    .collect();
                (heuristic_decide(b.heuristic, self.ctx.prompts, shots, desc, nav), DecisionSource::Heuristic, top)
            }
        };
        match result {
            Ok(d) => (d, source, shots),
            Err(e) => {
                let error = e.to_string();
                log::warn!("decision backend failed at tick {}: {error}; substituting DC", self.world.tick());
                self.log.push(LogRecord::Fallback { tick: self.world.tick(), error: error.clone() });
                self.fallbacks += 1;
                let d = Decision { reasoning: format!("Backend failure ({error}); decelerate as a precaution."), action: MetaAction::Dc, raw: String::new() };
                (d, DecisionSource::Fallback, shots)
            }
        }
    }

    fn decision_tick(&mut self, bank: &mut MemoryBank) -> Result<(), EndReason> {
        let started = self.ctx.clock.now();
        let tick = self.world.tick();
        let snap = self.world.snapshot();
        self.window.push_back(snap.clone());
        while self.window.len() > self.cfg.perceiver.window.max(1) {
            self.window.pop_front();
        }
        let ego = *self.world.ego();
        let frame = match self.path.project_pose(ego.position, ego.heading, ego.speed, 0.0) {
            Ok(mut f) => {
                // continue from the planned acceleration rather than the measured one
                if let Some(t) = &self.traj {
                    let elapsed = self.world.time() - self.planned_at;
                    f.s_dd = t.lon.eval(elapsed)[2];
                    f.d_dd = t.lat.eval(elapsed)[2];
                }
                Some(f)
            }
            Err(e) => {
                self.warn(format!("ego cannot be placed on the route: {e}"));
                None
            }
        };
        let s = frame.map(|f| f.s).unwrap_or(self.progress.value() * self.path.length());
        let nav = self.nav.hint(s);

        let window: Vec<WorldSnapshot> = self.window.iter().cloned().collect();
        let desc = match self.ctx.backends.perceiver.describe(&window, &self.world.scenario().lanes, EGO_ID) {
            Ok(d) => d,
            Err(e) => return Err(EndReason::ScenarioError(format!("perception failed: {e}"))),
        };
        let features = self.raster.features(&snap);
        let ego_vec = ego_vector(intent_index(nav.maneuver), ego.speed);
        let token = encode(self.ctx.encoder, &features, &ego_vec).map_err(|e| EndReason::ScenarioError(format!("encoder: {e}")))?;

        let (decision, source, shots) = self.decide(bank, &desc, &nav, &token);

        if self.cfg.mode == Mode::Analytic {
            let exp = Experience {
                token: token.clone(),
                description: desc.clone(),
                reasoning: decision.reasoning.clone(),
                decision: decision.action,
                provenance: Provenance::Analytic,
                fallback: source == DecisionSource::Fallback,
                created_at: CreatedAt { episode: self.episode, timestep: tick },
            };
            match bank.insert(exp.clone()) {
                Ok(()) => self.delta.push(exp),
                Err(e) => self.warn(format!("experience not stored: {e}")),
            }
        }
        if tick % self.cfg.rates.history_every() == 0 {
            self.history.push(HistoryRecord {
                tick,
                time: self.world.time(),
                token,
                description: desc.clone(),
                nav,
                reasoning: decision.reasoning.clone(),
                decision: decision.action,
            });
        }

        let width = self.path.meta_at(s).width;
        let mut executed = decision.action;
        let mut lane = LaneContext {
            width,
            d_ref: self.d_ref,
            left_available: lane_available(&self.world, &self.path, s, self.d_ref + width),
            right_available: lane_available(&self.world, &self.path, s, self.d_ref - width),
            stop_distance: stop_distance(&desc),
        };
        if (executed == MetaAction::Lcl && !lane.left_available) || (executed == MetaAction::Lcr && !lane.right_available) {
            self.warn(format!("{executed} requested without an adjacent lane; holding"));
            executed = MetaAction::Idle;
        }
        if executed != MetaAction::Stop {
            lane.stop_distance = None;
        }

        let (mut candidate, mut cost, mut emergency) = (None, None, false);
        self.traj = match frame {
            Some(f) => {
                let obs = obstacles(&snap);
                let pctx = PlanContext {
                    path: &self.path,
                    lane,
                    target_speed: nav.target_speed,
                    obstacles: &obs,
                    ego_half_extents: (ego.half_length, ego.half_width),
                };
                let planned = match plan_with_debug(executed, &f, &pctx, &self.cfg.planner) {
                    Ok((t, debug)) => {
                        if self.cfg.plan_debug {
                            self.log.push(LogRecord::Plan { tick, action: executed, candidates: dump(&debug) });
                        }
                        Ok(t)
                    }
                    Err(e) => {
                        log::warn!("planning {executed} failed: {e}; emergency stop");
                        emergency_stop(&FrenetState { d_dd: 0.0, ..f }, &pctx, &self.cfg.planner)
                    }
                };
                match planned {
                    Ok(t) => {
                        candidate = t.candidate;
                        cost = t.cost.is_finite().then_some(t.cost);
                        emergency = t.emergency;
                        Some(t)
                    }
                    Err(e) => {
                        self.warn(format!("no trajectory: {e}"));
                        None
                    }
                }
            }
            None => None,
        };
        self.planned_at = self.world.time();
        if matches!(executed, MetaAction::Lcl | MetaAction::Lcr) && self.traj.as_ref().is_some_and(|t| !t.emergency) {
            self.d_ref += if executed == MetaAction::Lcl { width } else { -width };
            self.nav.complete_lane_change(s, executed);
        }

        let trace = DecisionTrace {
            tick,
            time: self.world.time(),
            source,
            decision: decision.action,
            executed,
            reasoning: decision.reasoning,
            shots,
            candidate,
            cost,
            emergency,
            route_progress: self.progress.value(),
            speed: ego.speed,
        };
        self.log.push(LogRecord::Decision(trace.clone()));
        self.decisions.push(trace);
        self.decision_wall += self.ctx.clock.now() - started;
        Ok(())
    }

    fn reflect(&mut self, accident: &crate::sim::world::AccidentInfo, bank: &mut MemoryBank) {
        let created = CreatedAt { episode: self.episode, timestep: accident.timestep };
        match self.ctx.backends.reflector.reflect(self.ctx.prompts, accident, &self.history, created) {
            Ok(r) => {
                let trace = ReflectionTrace {
                    accident_tick: accident.timestep,
                    corrected_tick: r.tick,
                    step: r.step,
                    original: r.original,
                    corrected: r.experience.decision,
                    fallback: r.fallback,
                };
                match bank.insert(r.experience.clone()) {
                    Ok(()) => {
                        self.delta.push(r.experience);
                        self.log.push(LogRecord::Reflection(trace.clone()));
                        self.reflections.push(trace);
                    }
                    Err(e) => self.warn(format!("reflection not stored: {e}")),
                }
            }
            Err(e) => self.warn(format!("reflection failed: {e}")),
        }
    }
}

fn dump(debug: &PlanDebug) -> Vec<CandidateDump> {
    debug
        .targets
        .iter()
        .zip(&debug.costs)
        .map(|(t, c)| CandidateDump {
            s: t.state.s,
            s_d: t.state.s_d,
            d: t.state.d,
            lon_duration: t.lon_duration,
            lat_duration: t.lat_duration,
            jerk: c.jerk,
            accel: c.accel,
            speed: c.speed,
            lateral: c.lateral,
            obstacle: c.obstacle,
            total: c.total.is_finite().then_some(c.total),
        })
        .collect()
}

fn stub(scenario: &Scenario, cfg: &EpisodeConfig, ctx: &EpisodeContext<'_>, episode: u64, reason: EndReason) -> EpisodeOutcome {
    let seed = cfg.seed.unwrap_or(scenario.seed);
    let log = alloc::vec![
        LogRecord::Start { scenario: scenario.name.clone(), seed, episode, mode: cfg.mode, prompts: ctx.prompts.hashes() },
        LogRecord::End { tick: 0, time: 0.0, route_progress: 0.0, reason: reason.clone() },
    ];
    let m = compute_metrics(&log, &cfg.penalties);
    EpisodeOutcome {
        report: EpisodeReport {
            scenario: scenario.name.clone(),
            seed,
            episode,
            rc: m.rc,
            is: m.is,
            ds: m.ds,
            infractions: Vec::new(),
            decisions: Vec::new(),
            reflections: Vec::new(),
            end: reason,
            timed_out: false,
            timing: TimingStats::default(),
            bank_inserted: 0,
            revise: None,
            config: cfg.clone(),
            prompts: ctx.prompts.hashes(),
        },
        log,
        delta: Vec::new(),
    }
}

/// Runs one closed-loop episode: 2 Hz perceive-decide-plan, 20 Hz PID
/// tracking, accident handling and optional reflection. Analytic episodes
/// insert one experience per decision and revise the bank at the end.
pub fn run_episode(
    scenario: &Scenario,
    cfg: &EpisodeConfig,
    ctx: &EpisodeContext<'_>,
    bank: &mut MemoryBank,
    episode: u64,
) -> EpisodeOutcome {
    if let Err(e) = cfg.validate_runtime() {
        return stub(scenario, cfg, ctx, episode, EndReason::ScenarioError(e.to_string()));
    }
    let mut scenario = scenario.clone();
    if let Some(seed) = cfg.seed {
        scenario.seed = seed;
    }
    let path = match densify(&scenario.route, &scenario.lanes) {
        Ok(p) => p,
        Err(e) => return stub(&scenario, cfg, ctx, episode, EndReason::ScenarioError(format!("route: {e}"))),
    };
    let raster = Rasterizer::default();
    let (n, c) = raster.shape();
    let ecfg = &ctx.encoder.config;
    if (ecfg.grid_n, ecfg.grid_c) != (n, c) {
        let msg = format!("encoder expects a {}x{} grid, rasterizer gives {n}x{c}", ecfg.grid_n, ecfg.grid_c);
        return stub(&scenario, cfg, ctx, episode, EndReason::ScenarioError(msg));
    }

    let started = ctx.clock.now();
    let max_sim = cfg.max_sim_time_s.unwrap_or(scenario.limits.max_sim_time_s);
    let max_wall = cfg.max_wall_time_s.unwrap_or(scenario.limits.max_wall_time_s);
    let seed = scenario.seed;
    let name = scenario.name.clone();
    let nav = Navigator::new(&scenario, path.length());
    let bank_before = bank.len();

    let mut r = Runner {
        cfg,
        ctx,
        episode,
        world: World::new(scenario),
        path,
        raster,
        nav,
        window: VecDeque::new(),
        history: HistoryQueue::default(),
        tracker: Tracker::default(),
        traj: None,
        d_ref: 0.0,
        planned_at: 0.0,
        progress: ProgressTracker::default(),
        log: Vec::new(),
        decisions: Vec::new(),
        reflections: Vec::new(),
        infractions: Vec::new(),
        delta: Vec::new(),
        fallbacks: 0,
        decision_wall: 0.0,
    };
    r.log.push(LogRecord::Start { scenario: name.clone(), seed, episode, mode: cfg.mode, prompts: ctx.prompts.hashes() });
    let ego0 = r.world.ego().position;
    r.progress.update(r.path.line(), ego0);

    let dt = cfg.rates.dt();
    let mut timed_out = false;
    let end = loop {
        let tick = r.world.tick();
        if tick % cfg.rates.decision_every() == 0 {
            if ctx.clock.now() - started > max_wall {
                timed_out = true;
                break EndReason::WallTimeLimit;
            }
            if let Err(reason) = r.decision_tick(bank) {
                break reason;
            }
        }
        let ego = *r.world.ego();
        let control = match &r.traj {
            Some(t) => {
                let (v, target) = lookahead_select(t, ego.speed, ego.position);
                r.tracker.control(&ego, v, target, dt)
            }
            None => Control { throttle: 0.0, brake: 1.0, steer: 0.0 },
        };
        r.world.step(control, dt);
        let ego = *r.world.ego();
        let progress = r.progress.update(r.path.line(), ego.position);
        if cfg.log_ticks {
            r.log.push(LogRecord::Tick {
                tick: r.world.tick(),
                time: r.world.time(),
                position: ego.position,
                heading: ego.heading,
                speed: ego.speed,
                control,
                route_progress: progress,
            });
        }
        if let Some(acc) = r.world.detect_accident() {
            log::info!("{} at t={:.2} s", acc.kind.as_str(), acc.time);
            r.log.push(LogRecord::Accident(acc.clone()));
            r.infractions.push(acc.clone());
            if cfg.reflection {
                r.reflect(&acc, bank);
            }
            match acc.kind {
                AccidentKind::RedLightViolation => {}
                AccidentKind::OffRoad => break EndReason::OffRoad,
                _ => break EndReason::Collision,
            }
        }
        if progress >= 1.0 {
            break EndReason::RouteComplete;
        }
        if r.world.time() >= max_sim - 1e-9 {
            break EndReason::SimTimeLimit;
        }
    };

    let revise = (cfg.mode == Mode::Analytic).then(|| bank.revise());
    r.log.push(LogRecord::End { tick: r.world.tick(), time: r.world.time(), route_progress: r.progress.value(), reason: end.clone() });
    let m = compute_metrics(&r.log, &cfg.penalties);
    let n_dec = r.decisions.len();
    let report = EpisodeReport {
        scenario: name,
        seed,
        episode,
        rc: m.rc,
        is: m.is,
        ds: m.ds,
        infractions: r.infractions,
        decisions: r.decisions,
        reflections: r.reflections,
        end,
        timed_out,
        timing: TimingStats {
            sim_time_s: r.world.time(),
            wall_time_s: ctx.clock.now() - started,
            ticks: r.world.tick(),
            decisions: n_dec,
            fallbacks: r.fallbacks,
            mean_decision_s: if n_dec > 0 { r.decision_wall / n_dec as f64 } else { 0.0 },
        },
        bank_inserted: r.delta.len(),
        revise,
        config: cfg.clone(),
        prompts: ctx.prompts.hashes(),
    };
    debug_assert!(bank.len() <= bank_before + r.delta.len());
    EpisodeOutcome { report, log: r.log, delta: r.delta }
}

/// Replays the same scenario `rounds + 1` times on a bank that keeps the
/// experiences reflection adds after each accident.
pub fn run_reflection_loop(
    scenario: &Scenario,
    cfg: &EpisodeConfig,
    ctx: &EpisodeContext<'_>,
    bank: &mut MemoryBank,
    rounds: usize,
) -> Result<Vec<EpisodeOutcome>, HarnessError> {
    if !cfg.reflection {
        return Err(HarnessError::ReflectionDisabled);
    }
    Ok((0..=rounds).map(|i| run_episode(scenario, cfg, ctx, bank, i as u64)).collect())
}
