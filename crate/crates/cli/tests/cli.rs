//! End-to-end checks of the installed binary: exit codes, error
//! messages, and artifact idempotence.

use std::path::PathBuf;
use std::process::{Command, Output};

fn platoon() -> Command {
    Command::new(env!("CARGO_BIN_EXE_platoon"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn version_flag_works() {
    let out = platoon().arg("--version").output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("platoon"));
}

#[test]
fn run_writes_artifacts_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let mut cmd = platoon();
    cmd.args([
        "run",
        scenario("platoon_five.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--t-end",
        "2.0",
    ]);
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let read = |name: &str| std::fs::read(dir.path().join(name)).unwrap();
    let csv1 = read("trajectory.csv");
    assert!(!csv1.is_empty());
    assert!(dir.path().join("summary.txt").exists());
    assert!(dir.path().join("trajectory.svg").exists());
    assert!(dir.path().join("distances.svg").exists());

    // Rerunning over the same directory reproduces the bytes.
    let out2 = platoon()
        .args([
            "run",
            scenario("platoon_five.toml").to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--t-end",
            "2.0",
        ])
        .output()
        .unwrap();
    assert!(out2.status.success());
    assert_eq!(csv1, read("trajectory.csv"));
}

#[test]
fn missing_lr_exits_1_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("collision_course.toml")).unwrap();
    let broken = text.replacen("Lr = 1.738\n", "", 1);
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, broken).unwrap();
    let out = platoon()
        .args([
            "run",
            path.to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr_of(&out).contains("Lr"),
        "stderr: {}",
        stderr_of(&out)
    );
}

#[test]
fn unknown_key_exits_1_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("collision_course.toml")).unwrap();
    let broken = text.replace("[safety]", "[safety]\nwarp_drive = 1.0");
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, broken).unwrap();
    let out = platoon()
        .args([
            "run",
            path.to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr_of(&out).contains("warp_drive"),
        "stderr: {}",
        stderr_of(&out)
    );
}

#[test]
fn aborted_simulation_exits_2_with_status() {
    // A follower at rest commanded hard toward a close neighbor trips the
    // unfilterable-constraint guard at step 0.
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("collision_course.toml")).unwrap();
    let broken = text
        .replacen(
            "initial_state = { z1 = -30.0, z2 = 0.0, v = 8.0, psi = 0.0 }",
            "initial_state = { z1 = -30.0, z2 = 0.0, v = 0.0, psi = 0.0 }",
            1,
        )
        .replacen(
            "initial_input = { a = 0.0, gamma = 0.0 }",
            "initial_input = { a = 2.0, gamma = 0.0 }",
            1,
        )
        .replacen(
            "initial_state = { z1 = -50.0, z2 = 0.0, v = 8.0, psi = 0.0 }",
            "initial_state = { z1 = -29.0, z2 = 0.0, v = 1.0, psi = 0.0 }",
            1,
        );
    let path = dir.path().join("stalled.toml");
    std::fs::write(&path, broken).unwrap();
    let out = platoon()
        .args([
            "run",
            path.to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_of(&out));
    assert!(
        stderr_of(&out).contains("unfilterable-constraint"),
        "stderr: {}",
        stderr_of(&out)
    );
}

#[test]
fn no_safety_flag_reaches_negative_margin() {
    let dir = tempfile::tempdir().unwrap();
    let out = platoon()
        .args([
            "run",
            scenario("collision_course.toml").to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--t-end",
            "15.0",
            "--no-safety",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    let margin_line = summary
        .lines()
        .find(|l| l.starts_with("min pair margin"))
        .expect("margin line");
    let value: f64 = margin_line
        .rsplit(':')
        .next()
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(
        value < 0.0,
        "expected a negative margin, summary said: {margin_line}"
    );
}

#[test]
fn verify_graph_suite_passes() {
    let out = platoon().args(["verify", "graph"]).output().unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("[PASS]"));
    assert!(!stdout.contains("[FAIL]"));
}

#[test]
fn unknown_suite_exits_1() {
    let out = platoon().args(["verify", "nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("unknown suite"));
}
