use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tdgl-bohm"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL_UNIFORM: &str = r#"
scenario = "uniform-stationary"
seed = 3

[domain]
kind = "ring"
nodes = 32

[ensemble]
particles = 500
intervals = 10
"#;

const SMALL_QUENCH: &str = r#"
scenario = "ring-quench"
seed = 9

[domain]
kind = "ring"
nodes = 32

[solver]
t_end = 2.0
snapshot_stride = 50

[ensemble]
enabled = false
"#;

#[test]
fn lists_every_scenario() {
    let out = run(&["list-scenarios"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["uniform-stationary", "disc-stationary", "ring-quench", "strip-hall", "custom"] {
        assert!(text.contains(name), "{name} missing from:\n{text}");
    }
}

#[test]
fn bad_config_exits_one_with_all_errors() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "scenario = \"custom\"\n[params]\ngamma = -1.0\nalhpa = 2.0\n");
    let out = run(&["run", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("gamma"), "{err}");
    assert!(err.contains("alhpa") && err.contains("alpha"), "{err}");
    assert!(!tmp.path().join("o").join("manifest.json").exists());
}

#[test]
fn missing_config_file_exits_one() {
    let out = run(&["run", "--config", "/nonexistent/x.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_without_oracle_is_refused() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.toml", "scenario = \"custom\"\n");
    let out = run(&["verify", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("no oracle registered"));
}

#[test]
fn run_writes_manifest_and_snapshots() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "q.toml", SMALL_QUENCH);
    let dir = tmp.path().join("out");
    let out = run(&["run", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["scenario"], "ring-quench");
    assert_eq!(manifest["seed"], 9);
    let snaps = manifest["snapshots"].as_array().unwrap();
    assert!(snaps.len() >= 2);
    for s in snaps {
        let file = s["file"].as_str().unwrap();
        let text = fs::read_to_string(dir.join(file)).unwrap();
        assert!(text.starts_with("node_index,x,"), "{file}: {}", &text[..40.min(text.len())]);
    }
}

#[test]
fn same_seed_same_bytes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "u.toml", SMALL_UNIFORM);
    let mut logs = Vec::new();
    for k in 0..2 {
        let dir = tmp.path().join(format!("out{k}"));
        let out = run(&["run", "--config", &cfg, "--out", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let mut names: Vec<_> = fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .filter(|n| n.to_string_lossy().ends_with(".csv"))
            .collect();
        names.sort();
        logs.push(names.iter().map(|n| fs::read(dir.join(n)).unwrap()).collect::<Vec<_>>());
    }
    assert!(!logs[0].is_empty());
    assert_eq!(logs[0], logs[1]);
}

#[test]
fn seed_flag_overrides_file() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "u.toml", SMALL_UNIFORM);
    let dir = tmp.path().join("out");
    let out = run(&["run", "--config", &cfg, "--seed", "42", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 42);
}

#[test]
fn verify_uniform_passes_and_writes_report() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "u.toml", SMALL_UNIFORM);
    let dir = tmp.path().join("v");
    let out = run(&["verify", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.lines().any(|l| l.starts_with("PASS")));
    assert!(!text.contains("FAIL"));
    assert!(dir.join("verify.json").exists());
}
