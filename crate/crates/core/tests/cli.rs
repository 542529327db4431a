use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn flatcheck(args: &[&str], spec: &PathBuf) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flatcheck"))
        .arg(args[0])
        .arg(spec)
        .args(&args[1..])
        .output()
        .unwrap()
}

#[test]
fn check_passes_on_the_four_state_example() {
    let out = flatcheck(&["check"], &fixture("fourstate.spec"));
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("condition 1: pass") && text.contains("condition 2: pass"), "{text}");
}

#[test]
fn motor_condition_two_is_vacuous() {
    let out = flatcheck(&["check"], &fixture("motor.spec"));
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("condition 2: vacuous"));
}

#[test]
fn failing_conditions_exit_one() {
    let out = flatcheck(&["check"], &fixture("involutive.spec"));
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("level 1"), "{text}");
}

#[test]
fn transform_skips_construction_unless_forced() {
    let out = flatcheck(&["transform"], &fixture("perturbed.spec"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout).unwrap().contains("construction: skipped"));
}

#[test]
fn wrong_feedback_names_the_component() {
    let out = flatcheck(&["verify"], &fixture("fourstate_wrong_beta.spec"));
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("ĝ1 component"), "{text}");
}

#[test]
fn malformed_spec_exits_two_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.spec");
    std::fs::write(&path, "n = 2\nstates = x1 x2\nparams =\nf = 0, y\ng1 = 1, 0\ng2 = 0, 1\n").unwrap();
    let out = flatcheck(&["check"], &path);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 4") && err.contains("`y`"), "{err}");
}

#[test]
fn invalid_tolerance_exits_two() {
    let out = flatcheck(&["check", "--rank-tol", "-1"], &fixture("fourstate.spec"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    let json = dir.path().join("report.json");
    let out = Command::new(env!("CARGO_BIN_EXE_flatcheck"))
        .arg("simulate")
        .arg(fixture("motor.spec"))
        .args(["--dt", "0.01", "--horizon", "0.5", "--out"])
        .arg(&csv)
        .arg("--json")
        .arg(&json)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,z1,z2,z3,x1,x2,x3,v1,v2,u1,u2"));
    assert_eq!(lines.count(), 51);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let sim = &report["verification"]["simulation"];
    assert_eq!(sim["steps"], 50);
    assert!(sim["min_regularity"][0].as_f64().unwrap() > 0.1);
    assert_eq!(report["provenance"]["seed"], 0);
    assert_eq!(report["provenance"]["tolerances"]["rank"], 1e-9);
}
