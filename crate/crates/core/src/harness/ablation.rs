//! Few-shot count by memory size ablation grid.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::config::{EpisodeConfig, Mode};
use super::episode::{run_episode, EpisodeContext};
use crate::dual::MemoryBank;
use crate::sim::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub ks: Vec<usize>,
    pub sizes: Vec<usize>,
    /// Subsampling seeds; one grid per seed.
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub scenario: String,
    pub k: usize,
    pub size: usize,
    pub seed: u64,
    pub rc: f64,
    pub is: f64,
    pub ds: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    pub warnings: Vec<String>,
}

/// Runs heuristic episodes without reflection for every (seed, size, k).
/// Each cell works on its own copy of the subsampled bank.
pub fn run_ablation(
    scenario: &Scenario,
    cfg: &EpisodeConfig,
    ctx: &EpisodeContext<'_>,
    bank: &MemoryBank,
    spec: &AblationSpec,
) -> AblationReport {
    let mut report = AblationReport::default();
    let mut episode = 0u64;
    for &seed in &spec.seeds {
        for &size in &spec.sizes {
            let used = if size > bank.len() {
                let w = format!("requested bank size {size} exceeds the {} available experiences; using all", bank.len());
                log::warn!("{w}");
                report.warnings.push(w);
                bank.len()
            } else {
                size
            };
            let sub = bank.subsample(used, seed);
            for &k in &spec.ks {
                let cell = EpisodeConfig { mode: Mode::Heuristic, k, reflection: false, ..cfg.clone() };
                let mut local = sub.clone();
                let out = run_episode(scenario, &cell, ctx, &mut local, episode);
                episode += 1;
                report.rows.push(AblationRow {
                    scenario: out.report.scenario,
                    k,
                    size: used,
                    seed,
                    rc: out.report.rc,
                    is: out.report.is,
                    ds: out.report.ds,
                });
            }
        }
    }
    report
}
