use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fbm-blowup"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn unknown_flag_is_a_config_error() {
    assert_eq!(code(&run(&["simulate", "--no-such-flag"])), 1);
    assert_eq!(code(&run(&["no-such-command"])), 1);
}

#[test]
fn malformed_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"experiment": "Simulate", "unknown_key": 1}"#).unwrap();
    let out = run(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn invalid_parameter_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad_h.json");
    let text = run(&["default-config", "simulate"]).stdout;
    let text = String::from_utf8(text).unwrap().replace("\"h\": 0.1", "\"h\": 1.5");
    fs::write(&path, text).unwrap();
    assert_eq!(code(&run(&["simulate", "--config", path.to_str().unwrap()])), 1);
}

#[test]
fn mismatched_experiment_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("osgood.json");
    fs::write(&path, run(&["default-config", "osgood"]).stdout).unwrap();
    assert_eq!(code(&run(&["simulate", "--config", path.to_str().unwrap()])), 1);
}

#[test]
fn unwritable_output_is_a_resource_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = blocker.join("sub");
    assert_eq!(code(&run(&["osgood", "-q", "--out", out.to_str().unwrap()])), 3);
}

#[test]
fn default_configs_round_trip_through_run() {
    for name in ["simulate", "osgood", "validate", "kernel-check"] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("cfg.json");
        fs::write(&cfg, run(&["default-config", name]).stdout).unwrap();
        let out_dir = dir.path().join("out");
        let out = run(&["run", "-q", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(fs::read_dir(&out_dir).unwrap().count() > 0, "{name} wrote nothing");
    }
}

#[test]
fn seed_override_changes_the_path_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let read = |seed: &str, tag: &str| {
        let out = dir.path().join(tag);
        let status = run(&["simulate", "-q", "--seed", seed, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&status), 0);
        fs::read(out.join("trajectory.csv")).unwrap()
    };
    let a = read("3", "a");
    let b = read("3", "b");
    let c = read("4", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn trajectory_csv_has_the_documented_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    assert_eq!(code(&run(&["simulate", "-q", "--out", out.to_str().unwrap()])), 0);
    let text = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,t_k,tau_k,y,x,db"));
    assert_eq!(text.lines().last(), Some("# stop_reason=ThresholdHit"));
    for svg in ["path.svg", "ratio.svg", "times.svg"] {
        assert!(Path::new(&out.join(svg)).exists(), "{svg} missing");
    }
}

#[test]
fn calibration_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("kc");
    assert_eq!(code(&run(&["kernel-check", "-q", "--out", out.to_str().unwrap()])), 0);
    let produced = fs::read_to_string(out.join("d_h_calibration.csv")).unwrap();
    let golden = include_str!("golden/d_h_calibration.csv");
    assert_eq!(produced, golden);
}
