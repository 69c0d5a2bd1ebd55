mod common;

use std::fs;

use common::scenarios;
use dualdrive::io::{self, IoError};
use dualdrive::report::{ablation_csv_string, read_ablation_csv, save_ablation_csv};
use dualdrive::{encoder_for, synth};
use dualdrive_core::dual::{MemoryBank, PromptSet};
use dualdrive_core::encoder::{EncoderConfig, EncoderParams};
use dualdrive_core::harness::{run_episode, AblationRow, BuiltinBackends, EpisodeConfig, EpisodeContext, FrozenClock};

fn analytic_bank() -> MemoryBank {
    let sc = io::load_scenario(&scenarios().join("lead_brake.json")).unwrap();
    let cfg = EpisodeConfig::default();
    let prompts = PromptSet::default();
    let enc = encoder_for(&cfg).unwrap();
    let builtin = BuiltinBackends::from_config(&cfg);
    let ctx = EpisodeContext { prompts: &prompts, encoder: &enc, backends: builtin.backends(&cfg), clock: &FrozenClock };
    let mut bank = MemoryBank::new();
    run_episode(&sc, &cfg, &ctx, &mut bank, 0);
    assert!(bank.len() > 5);
    bank
}

#[test]
fn bank_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bank.jsonl");
    let bank = analytic_bank();
    io::save_bank(&path, &bank).unwrap();
    let loaded = io::load_bank(&path).unwrap();
    assert!(loaded.skipped.is_empty());
    assert_eq!(loaded.bank, bank);
    io::save_bank(&path, &loaded.bank).unwrap();
    let again = io::load_bank(&path).unwrap();
    assert_eq!(again.bank, bank);
}

#[test]
fn corrupt_bank_lines_are_skipped_and_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bank.jsonl");
    let bank = analytic_bank();
    io::save_bank(&path, &bank).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let n = lines.len();
    lines.insert(1, "{not json".into());
    let mut short: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
    short["token"] = serde_json::json!([1.0, 0.0]);
    lines.insert(3, short.to_string());
    lines.insert(4, String::new());
    fs::write(&path, lines.join("\n") + "\n").unwrap();

    let loaded = io::load_bank(&path).unwrap();
    assert_eq!(loaded.bank.len(), n);
    assert_eq!(loaded.bank, bank);
    let at: Vec<usize> = loaded.skipped.iter().map(|s| s.line).collect();
    assert_eq!(at, vec![2, 4]);
}

#[test]
fn missing_bank_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(io::load_bank(&dir.path().join("nope.jsonl")), Err(IoError::Io { .. })));
}

#[test]
fn ablation_csv_round_trips() {
    let rows: Vec<AblationRow> = (0..6)
        .map(|i| AblationRow {
            scenario: format!("s{i}"),
            k: i % 3,
            size: 90 * (1 + i % 2),
            seed: 17,
            rc: 100.0 / (i as f64 + 3.0),
            is: 0.7f64.powi(i as i32),
            ds: 0.1 + 1.0 / 3.0 * i as f64,
        })
        .collect();
    let text = ablation_csv_string(&rows);
    assert_eq!(text.lines().next().unwrap(), "scenario,k,size,seed,rc,is,ds");
    assert_eq!(read_ablation_csv(text.as_bytes()).unwrap(), rows);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/ablation.csv");
    save_ablation_csv(&path, &rows).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap(), text);
}

#[test]
fn shipped_scenarios_load() {
    for name in ["clean_200m", "lead_brake", "red_light", "pedestrian_crossing", "cut_in"] {
        io::load_scenario(&scenarios().join(format!("{name}.json"))).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn scenario_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let mut doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(scenarios().join("lead_brake.json")).unwrap()).unwrap();
    doc["lanes"][0]["width"] = "wide".into();
    fs::write(&path, doc.to_string()).unwrap();
    let msg = io::load_scenario(&path).unwrap_err().to_string();
    assert!(msg.contains("lanes[0].width"), "{msg}");

    doc["lanes"][0]["width"] = 3.5.into();
    doc["ego"]["lane"] = 42.into();
    fs::write(&path, doc.to_string()).unwrap();
    assert!(matches!(io::load_scenario(&path), Err(IoError::Invalid { .. })));
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(&path, r#"{"k": "three"}"#).unwrap();
    let msg = io::load_config(&path).unwrap_err().to_string();
    assert!(msg.contains("`k`"), "{msg}");

    let cfg = EpisodeConfig { k: 5, ..EpisodeConfig::default() };
    io::write_json(&path, &cfg).unwrap();
    assert_eq!(io::load_config(&path).unwrap(), cfg);
}

#[test]
fn dataset_and_params_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = EncoderConfig::default();
    let records = synth::separable(20, 3, &cfg);
    let data = dir.path().join("data.jsonl");
    io::write_dataset(&data, &records, [cfg.grid_n, cfg.grid_c]).unwrap();
    let back = io::read_dataset(&data).unwrap();
    assert!(back.skipped.is_empty());
    assert_eq!(back.records, records);

    let mut text = fs::read_to_string(&data).unwrap();
    text.push_str(r#"{"features":[1.0,2.0],"shape":[4,4],"intent":0,"speed":1.0,"steer":0.0,"brake":0.0}"#);
    text.push('\n');
    fs::write(&data, text).unwrap();
    let back = io::read_dataset(&data).unwrap();
    assert_eq!(back.records.len(), 20);
    assert_eq!(back.skipped.len(), 1);
    assert!(back.skipped[0].error.contains("shape"));

    let params = EncoderParams::init(&cfg, 11).unwrap();
    let p = dir.path().join("enc.json");
    io::save_params(&p, &params).unwrap();
    assert_eq!(io::load_params(&p).unwrap(), params);

    let mut doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
    doc["manifest"][0][1][0] = 1.into();
    fs::write(&p, doc.to_string()).unwrap();
    assert!(matches!(io::load_params(&p), Err(IoError::Invalid { .. })));
}
