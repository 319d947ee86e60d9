use std::fs;
use std::path::Path;
use std::process::Command;

use fallgas_cli::catalog::{find, simulate_example, Scale};
use fallgas_cli::{run, run_experiment};

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn simulate_with_no_events_writes_empty_stream() {
    let tmp = tempfile::tempdir().unwrap();
    let (r, dir) = run(&simulate_example(0), Some(tmp.path())).unwrap();
    assert!(r.error.is_none());
    assert!(read(&dir, "events.jsonl").is_empty());
    assert!(!dir.join("summary.csv").exists());
    let m: serde_json::Value = serde_json::from_slice(&read(&dir, "manifest.json")).unwrap();
    assert_eq!(m["partial"], false);
    assert_eq!(m["kind"], "simulate");
    assert_eq!(m["files"].as_array().unwrap().len(), 1);
}

#[test]
fn simulate_events_have_frozen_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, dir) = run(&simulate_example(20), Some(tmp.path())).unwrap();
    let text = String::from_utf8(read(&dir, "events.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    let mut keys: Vec<&str> = first.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort();
    assert_eq!(keys, ["T", "Y", "dt", "m", "path", "u_d"]);
    assert_eq!(first["m"], 1);
    let summary = String::from_utf8(read(&dir, "summary.csv")).unwrap();
    assert!(summary.starts_with("path,events,stop,window_start,final_y,final_t\n"));
    assert_eq!(summary.lines().count(), 5);
}

#[test]
fn same_seed_gives_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = simulate_example(200);
    let (_, da) = run(&cfg, Some(a.path())).unwrap();
    let (_, db) = run(&cfg, Some(b.path())).unwrap();
    for f in ["events.jsonl", "summary.csv", "path.csv", "manifest.json"] {
        assert_eq!(read(&da, f), read(&db, f), "{f}");
    }
    let mut other = cfg.clone();
    other.seed += 1;
    let c = tempfile::tempdir().unwrap();
    let (_, dc) = run(&other, Some(c.path())).unwrap();
    assert_ne!(read(&da, "events.jsonl"), read(&dc, "events.jsonl"));
}

#[test]
fn worker_count_does_not_change_results() {
    let mut cfg = find("AC4", Scale::Smoke).unwrap().config;
    cfg.threads = Some(1);
    let one = run_experiment(&cfg).unwrap();
    cfg.threads = Some(3);
    let three = run_experiment(&cfg).unwrap();
    assert_eq!(one.outcome.artifacts, three.outcome.artifacts);
    assert_eq!(one.outcome.verdicts, three.outcome.verdicts);
}

#[test]
fn verdict_file_has_required_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let (r, dir) = run(&find("AC12", Scale::Full).unwrap().config, Some(tmp.path())).unwrap();
    assert!(r.passed());
    let v: serde_json::Value = serde_json::from_slice(&read(&dir, "verdicts.json")).unwrap();
    for item in v.as_array().unwrap() {
        for k in ["criterion", "statistic", "target", "tolerance", "pass"] {
            assert!(item.get(k).is_some(), "missing {k}");
        }
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fallgas"))
}

fn write_config(dir: &Path, name: &str, scale: Scale) -> std::path::PathBuf {
    let p = dir.join(format!("{name}.toml"));
    fs::write(&p, find(name, scale).unwrap().config.to_toml().unwrap()).unwrap();
    p
}

#[test]
fn exit_code_reflects_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = write_config(tmp.path(), "AC12", Scale::Full);
    let st = bin().arg("run").arg(&ok).arg("--output").arg(tmp.path().join("ok")).status().unwrap();
    assert_eq!(st.code(), Some(0));

    // the entrance check against the quoted law fails for lambda > 0
    let bad = write_config(tmp.path(), "AC5", Scale::Smoke);
    let st = bin().arg("run").arg(&bad).arg("--output").arg(tmp.path().join("bad")).status().unwrap();
    assert_eq!(st.code(), Some(1));
    assert!(tmp.path().join("bad/verdicts.json").exists());

    let broken = tmp.path().join("broken.toml");
    fs::write(&broken, "name = \"x\"\nseed = 1\n[experiment]\nkind = \"nope\"\n").unwrap();
    let out = bin().arg("run").arg(&broken).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn seed_override_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "AC13", Scale::Full);
    let out_dir = tmp.path().join("o");
    let st = bin().arg("run").arg(&cfg).args(["--seed", "4242", "--output"]).arg(&out_dir).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let m: serde_json::Value = serde_json::from_slice(&read(&out_dir, "manifest.json")).unwrap();
    assert_eq!(m["seed"], 4242);
    assert_eq!(m["config"]["seed"], 4242);
}

#[test]
fn list_and_show() {
    let out = bin().arg("list").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 15);
    let out = bin().args(["show", "ac7", "--smoke"]).output().unwrap();
    assert!(out.status.success());
    let cfg = fallgas_cli::ExperimentConfig::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg.name, "ac7-smoke");
}
