mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::scenarios;
use dualdrive::io;
use dualdrive::report::read_ablation_csv;
use dualdrive_core::harness::EpisodeReport;

fn dualdrive(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualdrive"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .env_remove(dualdrive::chat::ENDPOINT_VAR)
        .output()
        .unwrap()
}

fn scenario(name: &str) -> String {
    scenarios().join(format!("{name}.json")).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "status {:?}\nstdout:\n{}\nstderr:\n{}", o.status, stdout(o), String::from_utf8_lossy(&o.stderr));
}

#[test]
fn run_writes_log_report_and_bank() {
    let dir = tempfile::tempdir().unwrap();
    let out = dualdrive(dir.path(), &["run", "--scenario", &scenario("clean_200m"), "--mode", "analytic"]);
    ok(&out);
    assert!(stdout(&out).contains("RC 100.00"), "{}", stdout(&out));
    let report: EpisodeReport = io::read_json(&dir.path().join("report.json")).unwrap();
    assert_eq!(report.rc, 100.0);
    assert_eq!(report.ds, 100.0);
    let log = fs::read_to_string(dir.path().join("log.jsonl")).unwrap();
    assert!(log.lines().count() > report.decisions.len());
    let bank = io::load_bank(&dir.path().join("bank.jsonl")).unwrap();
    assert!(bank.skipped.is_empty());
    assert!(!bank.bank.is_empty());
}

#[test]
fn corrupt_bank_finishes_with_exit_code_two() {
    let dir = tempfile::tempdir().unwrap();
    ok(&dualdrive(dir.path(), &["run", "--scenario", &scenario("lead_brake")]));
    let bank = dir.path().join("bank.jsonl");
    let mut text = fs::read_to_string(&bank).unwrap();
    text.push_str("garbage\n");
    fs::write(&bank, text).unwrap();

    let run = dir.path().join("heuristic");
    let out = dualdrive(&run, &["run", "--scenario", &scenario("lead_brake"), "--mode", "heuristic", "--k", "3", "--bank", bank.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipped 1 corrupt record"));
    assert!(run.join("report.json").exists());
}

#[test]
fn bad_inputs_fail_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = dualdrive(dir.path(), &["run"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no scenario"));

    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"k": -1}"#).unwrap();
    let out = dualdrive(dir.path(), &["--config", cfg.to_str().unwrap(), "run", "--scenario", &scenario("clean_200m")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`k`"));
}

#[test]
fn seed_flag_reaches_the_report() {
    let dir = tempfile::tempdir().unwrap();
    ok(&dualdrive(dir.path(), &["--seed", "41", "run", "--scenario", &scenario("clean_200m")]));
    let report: EpisodeReport = io::read_json(&dir.path().join("report.json")).unwrap();
    assert_eq!(report.seed, 41);
}

#[test]
fn reflect_loop_grows_the_bank() {
    let dir = tempfile::tempdir().unwrap();
    let out = dualdrive(dir.path(), &["reflect-loop", "--scenario", &scenario("lead_brake"), "--mode", "heuristic", "--k", "0", "--rounds", "1"]);
    ok(&out);
    let reports: Vec<EpisodeReport> = io::read_json(&dir.path().join("reports.json")).unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0].reflections.len(), 1);
    assert!(dir.path().join("round-1/log.jsonl").exists());
    assert!(!io::load_bank(&dir.path().join("bank.jsonl")).unwrap().bank.is_empty());
}

#[test]
fn ablate_prints_and_saves_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    ok(&dualdrive(dir.path(), &["run", "--scenario", &scenario("lead_brake")]));
    let bank = dir.path().join("bank.jsonl");
    let out = dualdrive(dir.path(), &["--seed", "17", "ablate", "--scenario", &scenario("lead_brake"), "--bank", bank.to_str().unwrap(), "--ks", "0,1", "--sizes", "5"]);
    ok(&out);
    let csv = fs::read_to_string(dir.path().join("ablation.csv")).unwrap();
    assert_eq!(stdout(&out), csv);
    let rows = read_ablation_csv(csv.as_bytes()).unwrap();
    assert_eq!(rows.iter().map(|r| (r.k, r.size, r.seed)).collect::<Vec<_>>(), vec![(0, 5, 17), (1, 5, 17)]);
}

#[test]
fn bank_export_import_and_subsample() {
    let dir = tempfile::tempdir().unwrap();
    ok(&dualdrive(dir.path(), &["run", "--scenario", &scenario("lead_brake")]));
    let bank = dir.path().join("bank.jsonl");
    let original = io::load_bank(&bank).unwrap().bank;
    let doc = dir.path().join("bank.json");
    let back = dir.path().join("back.jsonl");
    ok(&dualdrive(dir.path(), &["bank", "export", "--bank", bank.to_str().unwrap(), "--out", doc.to_str().unwrap()]));
    ok(&dualdrive(dir.path(), &["bank", "import", "--input", doc.to_str().unwrap(), "--out", back.to_str().unwrap()]));
    assert_eq!(io::load_bank(&back).unwrap().bank, original);

    let small = dir.path().join("small.jsonl");
    ok(&dualdrive(dir.path(), &["bank", "subsample", "--bank", bank.to_str().unwrap(), "--size", "3", "--out", small.to_str().unwrap()]));
    let sub = io::load_bank(&small).unwrap().bank;
    assert_eq!(sub.len(), 3);
    let mut at = 0;
    for e in sub.entries() {
        let i = original.entries()[at..].iter().position(|o| o == e).expect("subset keeps order") + at;
        at = i + 1;
    }
    ok(&dualdrive(dir.path(), &["bank", "stats", "--bank", bank.to_str().unwrap()]));
}

#[test]
fn encoder_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).display().to_string();
    ok(&dualdrive(dir.path(), &["--seed", "1", "synth-data", "--n", "120", "--out", &p("train.jsonl")]));
    ok(&dualdrive(dir.path(), &["--seed", "2", "synth-data", "--n", "40", "--out", &p("held.jsonl")]));
    let out = dualdrive(dir.path(), &["train-encoder", "--data", &p("train.jsonl"), "--epochs", "2", "--out", &p("enc.json")]);
    ok(&out);
    assert_eq!(stdout(&out).lines().filter(|l| l.starts_with("epoch ")).count(), 2);
    ok(&dualdrive(dir.path(), &["encode", "--params", &p("enc.json"), "--data", &p("held.jsonl"), "--out", &p("tokens.jsonl")]));
    assert_eq!(fs::read_to_string(p("tokens.jsonl")).unwrap().lines().count(), 40);
    let out = dualdrive(dir.path(), &["eval-precision", "--params", &p("enc.json"), "--train", &p("train.jsonl"), "--queries", &p("held.jsonl")]);
    ok(&out);
    assert!(stdout(&out).starts_with("precision@1: steer "));
}
