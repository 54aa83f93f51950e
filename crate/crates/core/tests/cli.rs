use std::process::{Command, Output};

use kplane_audit::audit::{parse_report, Verdict, SCHEMA_VERSION, SEED_ENV};

fn audit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kplane-audit"))
        .args(args)
        .env_remove(SEED_ENV)
        .output()
        .expect("binary runs")
}

#[test]
fn unknown_suite_exits_2_without_records() {
    let out = audit(&["run", "--suite", "no_such_suite"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown suite"));
}

#[test]
fn invalid_configuration_exits_2() {
    for args in [
        &["run", "--suite", "constants", "--tol", "-1"][..],
        &["run", "--suite", "manifolds", "--samples", "10"],
        &["run", "--suite", "manifolds", "--d", "3"],
        &["run", "--suite", "drury", "--d", "3", "--k", "3"],
        &["run", "--suite", "constants", "--bogus-flag"],
        &["run", "--suite", "constants", "--format", "yaml"],
    ] {
        let out = audit(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn passing_suite_exits_0_with_parseable_json() {
    let out = audit(&["run", "--suite", "covariance_lemma", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let report = parse_report(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(report.schema_version, SCHEMA_VERSION);
    assert_eq!(report.records.len(), 15);
    assert!(report.records.iter().all(|r| r.verdict == Verdict::Pass && r.seed == 7));
}

#[test]
fn failing_record_exits_1() {
    // the planar extension equality misses its target by a constant factor
    let out = audit(&["run", "--suite", "extension2d"]);
    assert_eq!(out.status.code(), Some(1));
    let report = parse_report(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert!(report.records.iter().any(|r| r.verdict == Verdict::Fail));
}

#[test]
fn identical_runs_are_byte_identical() {
    for suite in ["constants", "manifolds", "theorem22"] {
        let args = ["run", "--suite", suite, "--seed", "99", "--samples", "4000"];
        let a = audit(&args);
        let b = audit(&args);
        assert_eq!(a.status.code(), Some(0), "{suite}");
        assert_eq!(a.stdout, b.stdout, "{suite}");
    }
}

#[test]
fn seed_flag_overrides_environment() {
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_kplane-audit"));
        cmd.args(["run", "--suite", "manifolds", "--d", "3", "--k", "1", "--samples", "2000"]);
        cmd.env_remove(SEED_ENV);
        if let Some(v) = env {
            cmd.env(SEED_ENV, v);
        }
        if let Some(v) = flag {
            cmd.args(["--seed", v]);
        }
        let out = cmd.output().unwrap();
        parse_report(std::str::from_utf8(&out.stdout).unwrap()).unwrap().records[0].seed
    };
    assert_eq!(run(Some("11"), None), 11);
    assert_eq!(run(Some("11"), Some("12")), 12);
    assert_eq!(run(None, None), kplane_audit::audit::DEFAULT_SEED);
    let bad = Command::new(env!("CARGO_BIN_EXE_kplane-audit"))
        .args(["run", "--suite", "constants"])
        .env(SEED_ENV, "not-a-number")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn report_is_written_to_out_path() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let md = dir.path().join("report.md");
    let out = audit(&["run", "--suite", "constants", "--out", json.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let report = parse_report(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(report.records.iter().all(|r| r.suite == "constants"));

    let out = audit(&["run", "--suite", "constants", "--format", "markdown", "--out", md.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&md).unwrap();
    assert!(text.contains("## constants"));
    assert!(text.contains("| grassmann-mass-dual-formula |"));

    let missing = dir.path().join("no/such/dir/report.json");
    let out = audit(&["run", "--suite", "constants", "--out", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no/such/dir"));
}

#[test]
fn suite_lists_merge_in_fixed_order() {
    let out = audit(&["run", "--suite", "covariance_lemma,constants,gaussian_engine,constants"]);
    assert_eq!(out.status.code(), Some(0));
    let report = parse_report(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    let mut seen: Vec<&str> = Vec::new();
    for r in &report.records {
        if seen.last() != Some(&r.suite.as_str()) {
            seen.push(&r.suite);
        }
    }
    assert_eq!(seen, ["constants", "gaussian_engine", "covariance_lemma"]);
}
