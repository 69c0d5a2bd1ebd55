#![allow(dead_code)]

use dualdrive_core::dual::{MemoryBank, PromptSet};
use dualdrive_core::encoder::{EncoderConfig, EncoderParams};
use dualdrive_core::harness::{run_episode, BuiltinBackends, EpisodeConfig, EpisodeContext, EpisodeOutcome, FrozenClock};
use dualdrive_core::sim::scenario::{AgentDoc, AgentKind, EgoDoc, EpisodeLimits, LaneDoc, Scenario, ScenarioDoc, ScriptCommand};

pub fn lane(id: u32, y: f64, length: f64) -> LaneDoc {
    let n = (length / 5.0).round() as usize;
    LaneDoc {
        id,
        centerline: (0..=n).map(|i| [i as f64 * 5.0, y]).collect(),
        width: 3.5,
        successors: vec![],
        left: None,
        right: None,
        stop_sign_s: None,
        speed_limit: None,
    }
}

pub fn doc(name: &str, lanes: Vec<LaneDoc>, route_len: f64, speed: f64) -> ScenarioDoc {
    ScenarioDoc {
        schema_version: 1,
        name: name.into(),
        seed: 7,
        lanes,
        lights: vec![],
        ego: EgoDoc { lane: 0, s: 0.0, speed, wheelbase: 2.7, half_length: 2.4, half_width: 1.0 },
        route: vec![[0.0, 0.0], [route_len, 0.0]],
        target_speed: 10.0,
        navigation: vec![],
        agents: vec![],
        limits: None,
    }
}

/// Empty straight road with a 200 m route.
pub fn clean_route() -> Scenario {
    Scenario::from_doc(&doc("clean-200", vec![lane(0, 0.0, 220.0)], 200.0, 0.0)).unwrap()
}

pub fn vehicle(id: u32, s: f64, speed: f64, script: Vec<ScriptCommand>) -> AgentDoc {
    AgentDoc { id, kind: AgentKind::Vehicle, lane: Some(0), path: None, s, speed, half_length: None, half_width: None, script }
}

pub fn cmd(t: f64, speed: f64, accel: Option<f64>) -> ScriptCommand {
    ScriptCommand { t, speed: Some(speed), accel, lane: None, lane_change_s: 3.0 }
}

/// Lead vehicle ahead of a cruising ego brakes hard to a standstill.
pub fn lead_brake() -> Scenario {
    let mut d = doc("lead-brake", vec![lane(0, 0.0, 300.0)], 250.0, 10.0);
    d.agents = vec![vehicle(1, 10.0, 10.0, vec![cmd(3.2, 0.0, Some(12.0))])];
    d.limits = Some(EpisodeLimits { max_sim_time_s: 40.0, max_wall_time_s: 60.0 });
    Scenario::from_doc(&d).unwrap()
}

pub fn encoder(seed: u64) -> EncoderParams {
    EncoderParams::init(&EncoderConfig::default(), seed).unwrap()
}

pub fn run(scenario: &Scenario, cfg: &EpisodeConfig, bank: &mut MemoryBank, episode: u64) -> EpisodeOutcome {
    let prompts = PromptSet::default();
    let enc = encoder(cfg.encoder_seed);
    let builtin = BuiltinBackends::from_config(cfg);
    let ctx = EpisodeContext { prompts: &prompts, encoder: &enc, backends: builtin.backends(cfg), clock: &FrozenClock };
    run_episode(scenario, cfg, &ctx, bank, episode)
}
