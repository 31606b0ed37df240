//! End-to-end runs of the `qet` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qet"))
        .args(args)
        .env_remove("QET_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Column `name` of the first data row.
fn field(csv: &str, name: &str) -> f64 {
    let mut body = csv.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = body.next().unwrap().split(',').collect();
    let row: Vec<&str> = body.next().unwrap().split(',').collect();
    let j = header.iter().position(|h| *h == name).unwrap();
    row[j].parse().unwrap()
}

fn metrics(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn minimal_reproduces_reference_row() {
    let o = qet(&["minimal", "--h", "1", "--k", "0.2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    assert!((field(&csv, "E_UB") + 0.0180).abs() < 1e-4);
    assert!((field(&csv, "E_PA") - 0.9806).abs() < 1e-4);
    assert!(csv.contains("# seed = 0\n"));
    assert!(csv.contains("# timestamp = "));
}

#[test]
fn negative_coupling_is_a_validation_error_naming_the_flag() {
    let o = qet(&["minimal", "--h", "1", "--k", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--k"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn type_mismatch_names_the_flag() {
    let o = qet(&["unitary", "--h-b", "strong"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--h-b"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_is_rejected() {
    let o = qet(&["minimal", "--kappa", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flag_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# base run\nseed = 11\n\n[minimal]\nh = 1\nk = 1\n").unwrap();
    let cfg = cfg.to_str().unwrap();

    let from_file = stdout(&qet(&["minimal", "--config", cfg]));
    assert!((field(&from_file, "E_UB") + 0.1147).abs() < 1e-4);
    assert!(from_file.contains("# seed = 11\n"));

    let overridden = qet(&["minimal", "--config", cfg, "--k", "0.2", "--seed", "3"]);
    let csv = stdout(&overridden);
    assert!((field(&csv, "k") - 0.2).abs() < 1e-15);
    assert!((field(&csv, "E_UB") + 0.0180).abs() < 1e-4);
    assert!(csv.contains("# seed = 3\n"));
}

#[test]
fn file_errors_are_line_attributed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "[minimal]\nh = 1\nk = -1\n").unwrap();
    let o = qet(&["minimal", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.cfg:3 (k)"), "{}", stderr(&o));

    fs::write(&cfg, "[minimal]\nh = 1\nj = 2\n").unwrap();
    let o = qet(&["minimal", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.cfg:3: unknown key `j`"), "{}", stderr(&o));
}

#[test]
fn io_failures_exit_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.cfg");
    assert_eq!(qet(&["minimal", "--config", missing.to_str().unwrap()]).status.code(), Some(4));
    let unwritable = dir.path().join("no/such/dir/out.csv");
    assert_eq!(qet(&["minimal", "--output", unwritable.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn hardware_runs_are_byte_identical_under_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("hw.csv");
    let run = || {
        let o = qet(&["hardware", "--shots", "100000", "--seed", "7", "--deterministic", "-o", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        (fs::read(&out).unwrap(), fs::read(out.with_extension("json")).unwrap())
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    let csv = String::from_utf8(a.0).unwrap();
    assert!(!csv.contains("timestamp"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 5);

    let other = stdout(&qet(&["hardware", "--shots", "100000", "--seed", "8", "--deterministic"]));
    let same = stdout(&qet(&["hardware", "--shots", "100000", "--seed", "7", "--deterministic"]));
    let body = |s: &str| s.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&same), body(&csv));
    assert_ne!(body(&other), body(&csv));
}

#[test]
fn seed_falls_back_to_environment() {
    let via_flag = qet(&["hardware", "--shots", "5000", "--seed", "19", "--deterministic"]);
    let via_env = Command::new(env!("CARGO_BIN_EXE_qet"))
        .args(["hardware", "--shots", "5000", "--deterministic"])
        .env("QET_SEED", "19")
        .output()
        .unwrap();
    assert!(via_env.status.success());
    assert_eq!(via_flag.stdout, via_env.stdout);
}

#[test]
fn config_echo_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = stdout(&qet(&["cooling", "--beta-points", "3", "--k", "5", "--seed", "4", "--deterministic"]));
    let echo = qet_cli::table::config_echo(&first);
    let cfg = dir.path().join("echo.cfg");
    fs::write(&cfg, &echo).unwrap();
    let again = stdout(&qet(&["cooling", "--config", cfg.to_str().unwrap(), "--deterministic"]));
    assert_eq!(first, again);
}

#[test]
fn lorentzian_optimization_emits_negative_delta_e() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("qft.csv");
    let o = qet(&["qft", "--family", "lorentz", "--optimize", "--points", "200", "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = metrics(&out.with_extension("json"));
    assert_eq!(m["subcommand"], "qft");
    assert!(m["metrics"]["delta_e"].as_f64().unwrap() < 0.0, "{m}");
    assert!(m["metrics"]["depth"].as_f64().unwrap() > 0.0);
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.lines().any(|l| l == "x,rho_alice,rho_bob,rho_qet,rho_total"));
}

#[test]
fn slp_random_instances_agree_with_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("slp.json");
    let o = qet(&["slp", "--source", "random", "--instances", "4", "--seed", "6", "--metrics", json.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = metrics(&json);
    assert_eq!(m["metrics"]["instances"], 4);
    assert_eq!(m["metrics"]["disagreements"], 0);
    assert_eq!(stdout(&o).lines().filter(|l| !l.starts_with('#')).count(), 5);
}

#[test]
fn help_lists_parameters_with_defaults() {
    let o = qet(&["qft", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for flag in ["--family", "--optimize", "--t-signal", "--deterministic", "--config", "[default: gauss]"] {
        assert!(text.contains(flag), "missing {flag}");
    }
}
