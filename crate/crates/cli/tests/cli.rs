use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fluxcompose"))
        .args(args)
        .env_remove("FLUXCOMPOSE_LOG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn plan_lists_bundled_plan() {
    let d = data("emergency.fcd");
    let p = data("emergency.fcp");
    let o = run(&["plan", "--domain", d.to_str().unwrap(), "--problem", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "1. findResource(doctor,orthopedics)\n2. notifyResource(#n1,#c1,help)\n");
}

#[test]
fn plan_machine_format_is_tab_separated() {
    let o = run(&["plan", "--format", "machine"]);
    assert_eq!(o.status.code(), Some(0));
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "0\tfindResource(doctor,orthopedics)");
    assert!(lines[1].starts_with("1\tnotifyResource(#out_findResource_"));
}

#[test]
fn unsolvable_problem_exits_one() {
    let p = data("unsolvable.fcp");
    let o = run(&["plan", "--problem", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no plan within depth 8"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
}

#[test]
fn max_depth_bounds_search() {
    let o = run(&["plan", "--max-depth", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no plan within depth 1"));
}

#[test]
fn parse_error_reports_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.fcd");
    fs::write(&bad, "fluent know/1.\n\nbogus here\n").unwrap();
    let o = run(&["plan", "--domain", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with(&format!("{}:3:", bad.display())), "{err}");
}

#[test]
fn missing_file_is_usage_error() {
    let o = run(&["validate", "--roster", "/nonexistent/roster.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/roster.csv"));
}

#[test]
fn severity_classifies() {
    let o = run(&["severity", "--spec", "Orthopedics", "--symptoms", "pain"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "Minor\n");
    let o = run(&["severity", "--spec", "cardiology", "--symptoms", "palpitations,dizziness"]);
    assert_eq!(stdout(&o), "Major\n");
}

#[test]
fn validate_accepts_bundled_files() {
    let o = run(&["validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("ok:"));
}

#[test]
fn compose_wires_step_outputs() {
    let o = run(&[
        "compose",
        "--format",
        "machine",
        "--have",
        "Profession=doctor",
        "--have",
        "Specialization=orthopedics",
        "--have",
        "Message=help",
        "--want",
        "ConfirmSend",
        "--fact",
        "availableRole(doctor,orthopedics)",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("step\t0\tfindResource"), "{out}");
    assert!(out.contains("flow\t1\tP\toutput\t0\t"), "{out}");
}

#[test]
fn trace_ranks_responders() {
    let o = run(&["trace", "--pnr", "P1001", "--spec", "orthopedics"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("1. Ravi Kumar"));
    let o = run(&["trace", "--pnr", "NOPE"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let logs: Vec<Vec<u8>> = ["a.log", "b.log"]
        .iter()
        .map(|n| {
            let path = dir.path().join(n);
            let o = run(&["simulate", "--log", path.to_str().unwrap()]);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            fs::read(&path).unwrap()
        })
        .collect();
    assert!(!logs[0].is_empty());
    assert_eq!(logs[0], logs[1]);
    assert_eq!(String::from_utf8_lossy(&logs[0]).lines().count(), 3);
}

#[test]
fn env_var_overrides_log_flag() {
    let dir = tempfile::tempdir().unwrap();
    let flag = dir.path().join("flag.log");
    let env = dir.path().join("env.log");
    let o = Command::new(env!("CARGO_BIN_EXE_fluxcompose"))
        .args(["report", "--pnr", "P1001", "--spec", "orthopedics", "--at", "2026-03-14 10:00"])
        .arg("--log")
        .arg(&flag)
        .env("FLUXCOMPOSE_LOG", &env)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(env.exists());
    assert!(!flag.exists());
}

#[test]
fn report_requires_a_log() {
    let o = run(&["report", "--pnr", "P1001", "--at", "2026-03-14 10:00"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("FLUXCOMPOSE_LOG"));
}

#[test]
fn report_appends_sequential_ids() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.log");
    for _ in 0..2 {
        let o = run(&["report", "--pnr", "P1001", "--spec", "orthopedics", "--at", "2026-03-14 10:00", "--log", log.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let text = fs::read_to_string(&log).unwrap();
    let ids: Vec<u64> = text.lines().map(log_id).collect();
    assert_eq!(ids, [1, 2]);
}

fn log_id(line: &str) -> u64 {
    let rest = line.strip_prefix("{\"id\":").unwrap();
    rest[..rest.find(',').unwrap()].parse().unwrap()
}
