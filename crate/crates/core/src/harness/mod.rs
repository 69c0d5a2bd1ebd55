//! Episode orchestration, metrics and ablations.

pub mod ablation;
pub mod config;
pub mod episode;
pub mod log;
pub mod metrics;

pub use ablation::{run_ablation, AblationReport, AblationRow, AblationSpec};
pub use config::{BackendSpec, ConfigError, EpisodeConfig, Mode, PenaltyTable, Rates};
pub use episode::{
    run_episode, run_reflection_loop, Backends, BuiltinBackends, Clock, EpisodeContext, EpisodeOutcome, FrozenClock,
    HarnessError,
};
pub use log::{CandidateDump, DecisionSource, DecisionTrace, EndReason, EpisodeReport, LogRecord, ReflectionTrace, TimingStats};
pub use metrics::{compute_metrics, Metrics};
