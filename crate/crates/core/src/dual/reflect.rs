//! Post-accident reflection over the decision history.

use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bank::{CreatedAt, Experience, Provenance};
use super::history::HistoryQueue;
use super::prompts::PromptSet;
use super::reasoner::{rule_decide, BackendError, RuleParams};
use super::MetaAction;
use crate::sim::world::{AccidentInfo, AccidentKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReflectError {
    #[error("history queue is empty")]
    EmptyQueue,
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("unusable reflection output: {0:?}")]
    InvalidOutput(String),
}

/// A corrected experience and where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reflection {
    pub experience: Experience,
    /// Queue position of the corrected step, oldest first.
    pub step: usize,
    pub tick: u64,
    pub original: MetaAction,
    pub fallback: bool,
}

pub trait Reflector {
    fn reflect(
        &self,
        prompts: &PromptSet,
        accident: &AccidentInfo,
        queue: &HistoryQueue,
        created_at: CreatedAt,
    ) -> Result<Reflection, ReflectError>;
}

/// Replays the rule table over the queue and corrects the earliest step
/// where it asks for more caution than was taken.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RuleReflector {
    pub params: RuleParams,
}

/// Decision substituted at the latest step when no erroneous step is found.
pub fn fallback_action(kind: AccidentKind) -> MetaAction {
    match kind {
        AccidentKind::RedLightViolation => MetaAction::Stop,
        _ => MetaAction::Dc,
    }
}

fn relevant(kind: AccidentKind, corrected: MetaAction) -> bool {
    match kind {
        AccidentKind::RedLightViolation => corrected == MetaAction::Stop,
        AccidentKind::OffRoad => true,
        _ => matches!(corrected, MetaAction::Dc | MetaAction::Stop),
    }
}

impl Reflector for RuleReflector {
    fn reflect(
        &self,
        _prompts: &PromptSet,
        accident: &AccidentInfo,
        queue: &HistoryQueue,
        created_at: CreatedAt,
    ) -> Result<Reflection, ReflectError> {
        if queue.is_empty() {
            return Err(ReflectError::EmptyQueue);
        }
        for (i, rec) in queue.iter().enumerate() {
            let (better, why) = rule_decide(&rec.description, &rec.nav, &self.params);
            if better.caution() > rec.decision.caution() && relevant(accident.kind, better) {
                let reasoning = format!(
                    "Reflection on {} at t={:.1} s: choosing {} at step {i} was wrong. {why} The correct action is {better}.",
                    accident.kind.as_str(),
                    accident.time,
                    rec.decision,
                );
                return Ok(Reflection {
                    experience: Experience {
                        token: rec.token.clone(),
                        description: rec.description.clone(),
                        reasoning,
                        decision: better,
                        provenance: Provenance::Reflection,
                        fallback: false,
                        created_at,
                    },
                    step: i,
                    tick: rec.tick,
                    original: rec.decision,
                    fallback: false,
                });
            }
        }
        let step = queue.len() - 1;
        let rec = queue.get(step).ok_or(ReflectError::EmptyQueue)?;
        let action = fallback_action(accident.kind);
        let reasoning = format!(
            "Reflection on {} at t={:.1} s: no earlier step disagrees with the traffic rules; the last decision {} is replaced by {action}.",
            accident.kind.as_str(),
            accident.time,
            rec.decision,
        );
        Ok(Reflection {
            experience: Experience {
                token: rec.token.clone(),
                description: rec.description.clone(),
                reasoning,
                decision: action,
                provenance: Provenance::Reflection,
                fallback: true,
                created_at,
            },
            step,
            tick: rec.tick,
            original: rec.decision,
            fallback: true,
        })
    }
}
