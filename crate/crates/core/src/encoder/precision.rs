//! Retrieval precision of scene tokens.

use serde::{Deserialize, Serialize};

use super::loss::{LabelRule, Labels};
use crate::token::{dot, top_k, SceneToken, TokenError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Precision {
    pub steer: f64,
    pub brake: f64,
}

/// Fraction of the top-`k` training matches of each query whose steering is
/// within `sigma_act` (inclusive) and whose brake label agrees under
/// `brake_rule`.
pub fn precision_at_k(
    train: &[(SceneToken, Labels)],
    queries: &[(SceneToken, Labels)],
    k: usize,
    sigma_act: f64,
    sigma_acc: f64,
    brake_rule: LabelRule,
) -> Result<Precision, TokenError> {
    if train.is_empty() || queries.is_empty() || k == 0 {
        return Ok(Precision { steer: 0.0, brake: 0.0 });
    }
    let norms: alloc::vec::Vec<f64> = train.iter().map(|(t, _)| crate::math::sqrt(dot(&t.0, &t.0))).collect();
    let mut steer_hits = 0usize;
    let mut brake_hits = 0usize;
    let mut total = 0usize;
    for (q, ql) in queries {
        let top = top_k(q, train.iter().zip(&norms).map(|((t, _), n)| (t.as_slice(), *n)), k)?;
        for (i, _) in top {
            let tl = &train[i].1;
            total += 1;
            if (tl.steer - ql.steer).abs() <= sigma_act {
                steer_hits += 1;
            }
            let brake_ok = match brake_rule {
                LabelRule::Concurrence => (tl.brake > 0.0) == (ql.brake > 0.0),
                LabelRule::Threshold => (tl.brake - ql.brake).abs() <= sigma_acc,
            };
            if brake_ok {
                brake_hits += 1;
            }
        }
    }
    Ok(Precision { steer: steer_hits as f64 / total as f64, brake: brake_hits as f64 / total as f64 })
}
