//! Route completion, infraction score and driving score.

use serde::{Deserialize, Serialize};

use super::config::PenaltyTable;
use super::log::LogRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rc: f64,
    pub is: f64,
    pub ds: f64,
}

/// RC is 100 times the best route progress seen in the log, IS the product
/// of the penalties of all logged infractions, and DS their product.
pub fn compute_metrics(log: &[LogRecord], penalties: &PenaltyTable) -> Metrics {
    let mut progress: f64 = 0.0;
    let mut is = 1.0;
    for r in log {
        match r {
            LogRecord::Tick { route_progress, .. } | LogRecord::End { route_progress, .. } => {
                progress = progress.max(*route_progress)
            }
            LogRecord::Decision(d) => progress = progress.max(d.route_progress),
            LogRecord::Accident(a) => is *= penalties.penalty(a.kind),
            _ => {}
        }
    }
    let rc = 100.0 * progress.clamp(0.0, 1.0);
    Metrics { rc, is, ds: rc * is }
}
