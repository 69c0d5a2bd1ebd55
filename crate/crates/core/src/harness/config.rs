//! Episode configuration.

use alloc::string::String;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::PlannerConfig;
use crate::dual::RuleParams;
use crate::perceiver::PerceiverConfig;
use crate::sim::world::AccidentKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Analytic,
    Heuristic,
}

/// Reasoner selection for one process.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    #[default]
    RuleOracle,
    FewShotRule {
        #[serde(default = "default_adopt")]
        adopt_similarity: f64,
    },
    /// JSON chat endpoint; the URL and key come from the environment unless
    /// given here.
    External {
        model: String,
        #[serde(default)]
        endpoint: Option<String>,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
}

fn default_adopt() -> f64 {
    0.9
}

fn default_timeout_ms() -> u64 {
    10_000
}

impl BackendSpec {
    pub fn few_shot() -> Self {
        Self::FewShotRule { adopt_similarity: default_adopt() }
    }
}

/// Infraction score multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyTable {
    pub collision_pedestrian: f64,
    pub collision_vehicle: f64,
    pub collision_static: f64,
    pub red_light: f64,
    pub off_road: f64,
}

impl Default for PenaltyTable {
    fn default() -> Self {
        Self { collision_pedestrian: 0.50, collision_vehicle: 0.60, collision_static: 0.65, red_light: 0.70, off_road: 0.65 }
    }
}

impl PenaltyTable {
    pub fn penalty(&self, kind: AccidentKind) -> f64 {
        match kind {
            AccidentKind::CollisionPedestrian => self.collision_pedestrian,
            AccidentKind::CollisionVehicle => self.collision_vehicle,
            AccidentKind::CollisionStatic => self.collision_static,
            AccidentKind::RedLightViolation => self.red_light,
            AccidentKind::OffRoad => self.off_road,
        }
    }
}

/// Loop rates in Hz. Decision and history rates must divide the physics rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Rates {
    pub physics_hz: u32,
    pub decision_hz: u32,
    pub history_hz: u32,
}

impl Default for Rates {
    fn default() -> Self {
        Self { physics_hz: 20, decision_hz: 2, history_hz: 1 }
    }
}

impl Rates {
    pub fn dt(&self) -> f64 {
        1.0 / self.physics_hz as f64
    }

    pub fn decision_every(&self) -> u64 {
        (self.physics_hz / self.decision_hz) as u64
    }

    pub fn history_every(&self) -> u64 {
        (self.physics_hz / self.history_hz) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub scenario: String,
    pub mode: Mode,
    pub analytic_backend: BackendSpec,
    pub heuristic_backend: BackendSpec,
    /// Rule-based reflection unless an external model is named.
    pub reflection_backend: BackendSpec,
    /// Few-shot count for heuristic decisions.
    pub k: usize,
    pub bank: Option<String>,
    pub reflection: bool,
    /// Overrides the scenario seed when set.
    pub seed: Option<u64>,
    /// Seed of the randomly initialised encoder when no parameter file is given.
    pub encoder_seed: u64,
    pub encoder_params: Option<String>,
    pub rates: Rates,
    pub penalties: PenaltyTable,
    pub perceiver: PerceiverConfig,
    pub rules: RuleParams,
    pub planner: PlannerConfig,
    pub max_sim_time_s: Option<f64>,
    pub max_wall_time_s: Option<f64>,
    /// Emit one log record per physics tick.
    pub log_ticks: bool,
    /// Emit every planner candidate with its cost at each decision.
    pub plan_debug: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            scenario: String::new(),
            mode: Mode::Analytic,
            analytic_backend: BackendSpec::RuleOracle,
            heuristic_backend: BackendSpec::few_shot(),
            reflection_backend: BackendSpec::RuleOracle,
            k: 3,
            bank: None,
            reflection: false,
            seed: None,
            encoder_seed: 0,
            encoder_params: None,
            rates: Rates::default(),
            penalties: PenaltyTable::default(),
            perceiver: PerceiverConfig::default(),
            rules: RuleParams::default(),
            planner: PlannerConfig::default(),
            max_sim_time_s: None,
            max_wall_time_s: None,
            log_ticks: false,
            plan_debug: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("heuristic mode with k = {0} needs a memory bank path")]
    MissingBank(usize),
    #[error("rate {what} = {value} Hz does not divide the physics rate {physics} Hz")]
    Rate { what: &'static str, value: u32, physics: u32 },
    #[error("{0} must be positive and finite")]
    Limit(&'static str),
    #[error("penalty for {0} must lie in [0, 1]")]
    Penalty(&'static str),
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.mode == Mode::Heuristic && self.k > 0 && self.bank.is_none() {
            return Err(ConfigError::MissingBank(self.k));
        }
        self.validate_runtime()
    }

    /// Checks everything except the file references.
    pub fn validate_runtime(&self) -> Result<(), ConfigError> {
        let r = self.rates;
        for (what, value) in [("decision_hz", r.decision_hz), ("history_hz", r.history_hz)] {
            if value == 0 || r.physics_hz == 0 || r.physics_hz % value != 0 {
                return Err(ConfigError::Rate { what, value, physics: r.physics_hz });
            }
        }
        for (what, v) in [("max_sim_time_s", self.max_sim_time_s), ("max_wall_time_s", self.max_wall_time_s)] {
            if v.is_some_and(|v| !(v > 0.0 && v.is_finite())) {
                return Err(ConfigError::Limit(what));
            }
        }
        let p = self.penalties;
        for (what, v) in [
            ("collision_pedestrian", p.collision_pedestrian),
            ("collision_vehicle", p.collision_vehicle),
            ("collision_static", p.collision_static),
            ("red_light", p.red_light),
            ("off_road", p.off_road),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::Penalty(what));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heuristic_needs_bank_only_with_shots() {
        let mut c = EpisodeConfig { mode: Mode::Heuristic, ..Default::default() };
        assert_eq!(c.validate(), Err(ConfigError::MissingBank(3)));
        c.k = 0;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rates_must_divide() {
        let c = EpisodeConfig { rates: Rates { physics_hz: 20, decision_hz: 3, history_hz: 1 }, ..Default::default() };
        assert!(matches!(c.validate(), Err(ConfigError::Rate { what: "decision_hz", .. })));
        assert_eq!(Rates::default().decision_every(), 10);
        assert_eq!(Rates::default().history_every(), 20);
    }
}
