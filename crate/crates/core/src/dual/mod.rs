//! Dual-process decision core: experience memory, analytic and heuristic
//! reasoning, and accident reflection.

pub mod bank;
pub mod history;
pub mod prompts;
pub mod reasoner;
pub mod reflect;

use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::sim::scenario::NavManeuver;
pub use bank::{BankError, BankStats, CreatedAt, Experience, MemoryBank, Provenance, ReviseReport};
pub use history::{HistoryQueue, HistoryRecord, HISTORY_CAPACITY};
pub use prompts::{PromptHashes, PromptSet};
pub use reasoner::{
    analytic_decide, heuristic_decide, parse_decision, render_context, rule_decide, BackendError, Decision,
    DecideError, DecisionRequest, FewShotRuleModel, ReasonerBackend, RuleOracle, RuleParams, Shot,
};
pub use reflect::{ReflectError, Reflection, Reflector, RuleReflector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetaAction {
    #[serde(rename = "AC")]
    Ac,
    #[serde(rename = "DC")]
    Dc,
    #[serde(rename = "LCL")]
    Lcl,
    #[serde(rename = "LCR")]
    Lcr,
    #[serde(rename = "IDLE")]
    Idle,
    #[serde(rename = "STOP")]
    Stop,
}

impl MetaAction {
    pub const ALL: [MetaAction; 6] =
        [MetaAction::Ac, MetaAction::Dc, MetaAction::Lcl, MetaAction::Lcr, MetaAction::Idle, MetaAction::Stop];

    pub fn as_str(self) -> &'static str {
        match self {
            MetaAction::Ac => "AC",
            MetaAction::Dc => "DC",
            MetaAction::Lcl => "LCL",
            MetaAction::Lcr => "LCR",
            MetaAction::Idle => "IDLE",
            MetaAction::Stop => "STOP",
        }
    }

    /// Longitudinal caution: STOP > DC > IDLE = lane changes > AC.
    pub fn caution(self) -> u8 {
        match self {
            MetaAction::Stop => 3,
            MetaAction::Dc => 2,
            MetaAction::Idle | MetaAction::Lcl | MetaAction::Lcr => 1,
            MetaAction::Ac => 0,
        }
    }
}

impl fmt::Display for MetaAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown meta-action {0:?}")]
pub struct UnknownAction(pub alloc::string::String);

impl FromStr for MetaAction {
    type Err = UnknownAction;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().trim_matches(|c: char| c == '"' || c == '\'' || c == '.' || c == '*' || c == '`');
        MetaAction::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(t))
            .ok_or_else(|| UnknownAction(alloc::string::String::from(s)))
    }
}

/// Route guidance at decision time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavigationHint {
    pub maneuver: NavManeuver,
    pub distance: f64,
    pub target_speed: f64,
}

impl NavManeuver {
    pub fn as_str(self) -> &'static str {
        match self {
            NavManeuver::Straight => "go straight",
            NavManeuver::Left => "turn left",
            NavManeuver::Right => "turn right",
            NavManeuver::LaneChangeLeft => "change to the left lane",
            NavManeuver::LaneChangeRight => "change to the right lane",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for a in MetaAction::ALL {
            assert_eq!(a.as_str().parse::<MetaAction>().unwrap(), a);
        }
        assert_eq!(" stop. ".parse::<MetaAction>().unwrap(), MetaAction::Stop);
        assert!("BRAKE".parse::<MetaAction>().is_err());
    }
}
