mod common;

use std::time::Duration;

use common::{scenarios, MockChat, Reply};
use dualdrive::io::load_scenario;
use dualdrive::{encoder_for, AgentBackends};
use dualdrive_core::dual::{MemoryBank, MetaAction, PromptSet};
use dualdrive_core::harness::{run_episode, BackendSpec, DecisionSource, EpisodeConfig, EpisodeContext, EpisodeOutcome, FrozenClock, Mode};
use dualdrive_core::sim::scenario::Scenario;

fn external(url: &str, timeout_ms: u64) -> BackendSpec {
    BackendSpec::External { model: "mock-model".into(), endpoint: Some(url.into()), timeout_ms }
}

fn episode(sc: &Scenario, cfg: &EpisodeConfig, bank: &mut MemoryBank) -> EpisodeOutcome {
    let prompts = PromptSet::default();
    let enc = encoder_for(cfg).unwrap();
    let agents = AgentBackends::from_config(cfg).unwrap();
    let ctx = EpisodeContext { prompts: &prompts, encoder: &enc, backends: agents.backends(cfg), clock: &FrozenClock };
    run_episode(sc, cfg, &ctx, bank, 0)
}

fn clean() -> Scenario {
    load_scenario(&scenarios().join("clean_200m.json")).unwrap()
}

#[test]
fn chat_decisions_drive_the_episode() {
    let server = MockChat::start(Reply::Content("Reasoning: the road ahead is empty.\nDecision: AC".into()));
    let cfg = EpisodeConfig { analytic_backend: external(&server.url, 5_000), max_sim_time_s: Some(3.0), ..EpisodeConfig::default() };
    let mut bank = MemoryBank::new();
    let out = episode(&clean(), &cfg, &mut bank);
    assert!(!out.report.decisions.is_empty());
    for d in &out.report.decisions {
        assert_eq!(d.source, DecisionSource::Analytic);
        assert_eq!(d.decision, MetaAction::Ac);
    }
    let reqs = server.requests();
    assert_eq!(reqs.len(), out.report.decisions.len());
    let r = &reqs[0];
    assert_eq!(r["model"], "mock-model");
    assert_eq!(r["system"], PromptSet::default().system);
    assert_eq!(r["messages"][0]["role"], "user");
    assert!(!r["messages"][0]["content"].as_str().unwrap().is_empty());
    assert!(bank.entries().iter().all(|e| e.reasoning == "the road ahead is empty."));
}

#[test]
fn slow_endpoint_times_out_to_fallback() {
    let server = MockChat::start(Reply::Slow(Duration::from_millis(600), "Decision: AC".into()));
    let cfg = EpisodeConfig { analytic_backend: external(&server.url, 100), max_sim_time_s: Some(1.0), ..EpisodeConfig::default() };
    let out = episode(&clean(), &cfg, &mut MemoryBank::new());
    assert!(!out.report.decisions.is_empty());
    assert!(out.report.decisions.iter().all(|d| d.source == DecisionSource::Fallback && d.decision == MetaAction::Dc));
    assert_eq!(out.report.timing.fallbacks, out.report.decisions.len());
}

#[test]
fn http_errors_and_garbage_fall_back() {
    for reply in [Reply::Status(500, "overloaded".into()), Reply::Content("I would rather not say.".into())] {
        let server = MockChat::start(reply);
        let cfg = EpisodeConfig { analytic_backend: external(&server.url, 5_000), max_sim_time_s: Some(1.0), ..EpisodeConfig::default() };
        let out = episode(&clean(), &cfg, &mut MemoryBank::new());
        assert!(out.report.decisions.iter().all(|d| d.source == DecisionSource::Fallback));
    }
}

#[test]
fn chat_reflection_stores_one_correction() {
    let server = MockChat::start(Reply::Content("No single step is to blame.\nStep: none".into()));
    let sc = load_scenario(&scenarios().join("lead_brake.json")).unwrap();
    let cfg = EpisodeConfig {
        mode: Mode::Heuristic,
        k: 0,
        reflection: true,
        reflection_backend: external(&server.url, 5_000),
        ..EpisodeConfig::default()
    };
    let mut bank = MemoryBank::new();
    let out = episode(&sc, &cfg, &mut bank);
    assert_eq!(out.report.reflections.len(), 1);
    let r = &out.report.reflections[0];
    assert!(r.fallback);
    assert_eq!(r.corrected, MetaAction::Dc);
    assert_eq!(bank.entries()[0].decision, MetaAction::Dc);
    assert_eq!(bank.len(), 1);
    let reqs = server.requests();
    assert_eq!(reqs.len(), 1);
    let prompt = reqs[0]["messages"][0]["content"].as_str().unwrap();
    assert!(prompt.contains("## Accident"), "{prompt}");
    assert!(prompt.contains("### Step 0"), "{prompt}");
}

#[test]
fn out_of_range_reflection_step_is_rejected() {
    let server = MockChat::start(Reply::Content("Step: 99\nDecision: STOP".into()));
    let sc = load_scenario(&scenarios().join("lead_brake.json")).unwrap();
    let cfg = EpisodeConfig {
        mode: Mode::Heuristic,
        k: 0,
        reflection: true,
        reflection_backend: external(&server.url, 5_000),
        ..EpisodeConfig::default()
    };
    let mut bank = MemoryBank::new();
    let out = episode(&sc, &cfg, &mut bank);
    assert!(out.report.reflections.is_empty());
    assert!(bank.is_empty());
}

#[test]
fn missing_endpoint_is_a_configuration_error() {
    if std::env::var(dualdrive::chat::ENDPOINT_VAR).is_ok() {
        return;
    }
    let cfg = EpisodeConfig {
        analytic_backend: BackendSpec::External { model: String::new(), endpoint: None, timeout_ms: 100 },
        ..EpisodeConfig::default()
    };
    assert!(AgentBackends::from_config(&cfg).is_err());
}
