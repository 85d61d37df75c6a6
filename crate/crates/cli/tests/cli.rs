use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn oscprobe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oscprobe")).args(args).output().expect("binary runs")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn error_json(o: &Output) -> serde_json::Value {
    let err = String::from_utf8_lossy(&o.stderr);
    let line = err.lines().last().expect("an error line");
    serde_json::from_str(line).expect("error line is JSON")
}

#[test]
fn diagonalize_chain_matches_closed_forms() {
    let o = oscprobe(&["--chain", "8,1,0.2", "diagonalize"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("chain closed forms")).expect("closed-form line");
    let worst: f64 = line.rsplit("= ").next().unwrap().parse().unwrap();
    assert!(worst < 1e-10, "{line}");
    assert!(text.contains("A1 (probe couples to every mode): ok"));
}

#[test]
fn short_interaction_time_fails_with_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("fig4.json");
    let o = oscprobe(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "synthesize", "--t", "5"]);
    assert!(!o.status.success());
    assert_eq!(error_json(&o)["error"], "IllConditioned");
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("vacuum_grid.json");
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = oscprobe(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "simulate"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out.join("measurements.csv")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 10);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["status"], "ok");
}

#[test]
fn seed_override_changes_shots_and_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("vacuum_grid.json");
    let out = |s: &str| dir.path().join(s);
    for (sub, seed) in [("a", "7"), ("b", "8")] {
        let o = oscprobe(&["--config", cfg.to_str().unwrap(), "--out", out(sub).to_str().unwrap(), "--seed", seed, "simulate"]);
        assert!(o.status.success());
    }
    let a = fs::read(out("a/measurements.csv")).unwrap();
    let b = fs::read(out("b/measurements.csv")).unwrap();
    assert_ne!(a, b);
    let manifest = fs::read_to_string(out("b/manifest.json")).unwrap();
    assert!(manifest.contains("--seed 8"));
}

#[test]
fn reconstruct_recovers_two_mode_squeezing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("two_mode_squeezed.json");
    let run = dir.path().join("tms");
    let o = oscprobe(&["--config", cfg.to_str().unwrap(), "--out", run.to_str().unwrap(), "simulate"]);
    assert!(o.status.success());
    let input = run.join("measurements.csv");
    let o = oscprobe(&["--config", cfg.to_str().unwrap(), "reconstruct", "--input", input.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let moments = fs::read_to_string(run.join("moments.csv")).unwrap();
    let want = -(0.2f64.sinh() * 0.2f64.cosh());
    let row = moments
        .lines()
        .find(|l| l.starts_with("a_a,0,1,"))
        .unwrap_or_else(|| panic!("no anomalous row in\n{moments}"));
    let re: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
    assert!((re - want).abs() < 1e-5, "{row}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("vacuum_grid.json")).unwrap();
    let bad = text.replacen("\"shots\"", "\"shotz\": 1,\n  \"shots\"", 1);
    let path = dir.path().join("bad.json");
    fs::write(&path, bad).unwrap();
    let o = oscprobe(&["--config", path.to_str().unwrap(), "simulate"]);
    assert!(!o.status.success());
    let err = error_json(&o);
    assert!(err["message"].as_str().unwrap().contains("shotz"), "{err}");
}

#[test]
fn validate_passes_every_check() {
    let o = oscprobe(&["validate"]);
    let text = stdout(&o);
    assert!(o.status.success(), "{text}");
    assert!(text.contains("13/13 checks passed"), "{text}");
}
