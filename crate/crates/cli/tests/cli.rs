use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ksns(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ksns")).args(args).current_dir(cwd).output().unwrap()
}

fn write_config(dir: &Path, extra: &str) -> String {
    let text = format!(
        "scenario = two_bumps\ngrid.nx = 16\ngrid.ny = 16\ntime.T = 0.02\n\
         output.record_interval = 0.005\noutput.dir = out\n{extra}"
    );
    fs::write(dir.join("run.cfg"), text).unwrap();
    "run.cfg".to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn gronwall_prints_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let o = ksns(&["gronwall", "--y0", "1", "--A", "1", "--B", "1", "--sigma", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "3");
    let o = ksns(&["gronwall", "--y0", "1", "--A", "-1", "--B", "1", "--sigma", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), "scenario = two_bumps\nmodel.m = 0.5\n").unwrap();
    for cmd in ["run", "sweep", "verify"] {
        assert_eq!(ksns(&[cmd, "bad.cfg"], dir.path()).status.code(), Some(2), "{cmd}");
    }
    assert_eq!(ksns(&["run", "missing.cfg"], dir.path()).status.code(), Some(2));
}

#[test]
fn invariant_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "verify.mass_tol = 1e-300\n");
    let o = ksns(&["verify", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("FAIL mass") && out.contains("PASS divergence"), "{out}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("invariant failure: mass"));
}

#[test]
fn run_is_deterministic_and_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    assert_eq!(ksns(&["verify", &cfg], dir.path()).status.code(), Some(0));
    let mut csvs = Vec::new();
    for _ in 0..2 {
        let o = ksns(&["run", &cfg], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        csvs.push(fs::read(dir.path().join("out/diagnostics.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(String::from_utf8_lossy(&csvs[0]).lines().count(), 6);
}

#[test]
fn sweep_without_children_writes_a_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let o = ksns(&["sweep", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn sweep_runs_each_child() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sweep.m = [1.5, 2.0]\n");
    let o = Command::new(env!("CARGO_BIN_EXE_ksns"))
        .args(["sweep", &cfg])
        .current_dir(dir.path())
        .env("KSNS_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
