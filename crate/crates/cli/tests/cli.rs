use std::path::Path;
use std::process::{Command, Output};

fn declqr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_declqr"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

#[test]
fn analyze_exits_2_when_r_is_coupled() {
    let dir = tempfile::tempdir().unwrap();
    let out = declqr(dir.path(), &["--scenario", "counterexample:rho=50", "analyze"]);
    assert_eq!(out.status.code(), Some(2));
    let json = std::fs::read_to_string(dir.path().join("analysis.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["hypotheses"]["r_block_diagonal"], false);
    assert!(v["guarantees_pass"].is_null());
}

#[test]
fn analyze_nominal_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = declqr(dir.path(), &["analyze"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("analysis.json")).unwrap()).unwrap();
    assert_eq!(v["guarantees_pass"], true);
}

#[test]
fn bad_scenario_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = declqr(dir.path(), &["--scenario", "no-such-file.json", "synth"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn scenario_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    std::fs::write(&path, declqr_cli::scenario::diamond_random(3).to_json()).unwrap();
    let out = declqr(dir.path(), &["--scenario", path.to_str().unwrap(), "synth"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("synthesis.json")).unwrap()).unwrap();
    assert_eq!(v["nodes"].as_array().unwrap().len(), 4);
}
