//! End-to-end tests of the shipped binary: artifact round trips, campaign
//! fan-out, exit codes, and output discipline.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pseudoaka"));
    // Deterministic output regardless of the invoking shell's environment.
    c.env_remove("PSEUDOAKA_LOG");
    c
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"))
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf8 stderr")
}

#[test]
fn run_writes_artifacts_and_billing_resolves_them() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let report = dir.path().join("report.json");
    let hn_log = dir.path().join("hn.jsonl");

    let out = bin()
        .arg("run")
        .arg(scenario("stale_guti_billing"))
        .arg("--trace-out")
        .arg(&trace)
        .arg("--report-out")
        .arg(&report)
        .arg("--hn-log-out")
        .arg(&hn_log)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("events"), "summary on stdout");

    // Trace: one JSON object per line.
    let trace_text = std::fs::read_to_string(&trace).unwrap();
    assert!(trace_text.lines().count() > 5);
    for line in trace_text.lines() {
        serde_json::from_str::<serde_json::Value>(line).expect("trace line is JSON");
    }
    // Report: JSON first line, '#'-prefixed human summary after.
    let report_text = std::fs::read_to_string(&report).unwrap();
    let mut lines = report_text.lines();
    serde_json::from_str::<serde_json::Value>(lines.next().unwrap()).expect("report JSON");
    assert!(lines.clone().count() > 0);
    assert!(lines.all(|l| l.starts_with("# ")));

    // The billing command closes the loop on the same artifacts.
    let bill = dir.path().join("billing.json");
    let out = bin()
        .arg("billing")
        .arg(&trace)
        .arg(&hn_log)
        .arg("--report-out")
        .arg(&bill)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("resolved"));
    let bill_text = std::fs::read_to_string(&bill).unwrap();
    let parsed: serde_json::Value =
        serde_json::from_str(bill_text.lines().next().unwrap()).unwrap();
    assert_eq!(parsed["records"], parsed["resolved"]);
}

#[test]
fn same_seed_produces_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for i in 0..2 {
        let trace = dir.path().join(format!("t{i}.jsonl"));
        let out = bin()
            .arg("run")
            .arg(scenario("desync_drill"))
            .args(["--seed", "11"])
            .arg("--trace-out")
            .arg(&trace)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        texts.push(std::fs::read(&trace).unwrap());
    }
    assert_eq!(texts[0], texts[1], "same scenario + seed, different bytes");
}

#[test]
fn campaign_fans_out_with_seed_suffixed_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let out = bin()
        .arg("run")
        .arg(scenario("stale_guti_billing"))
        .args(["--seed", "7", "--jobs", "3"])
        .arg("--trace-out")
        .arg(&trace)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(!trace.exists(), "campaign mode must not write the bare path");
    for seed in 7..10 {
        let p = dir.path().join(format!("trace-{seed}.jsonl"));
        assert!(p.exists(), "missing artifact for seed {seed}");
    }
}

#[test]
fn quiet_mode_silences_stdout() {
    let out = bin()
        .arg("run")
        .arg(scenario("stale_guti_billing"))
        .env("PSEUDOAKA_LOG", "quiet")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).is_empty(), "quiet run must print nothing");
}

#[test]
fn missing_scenario_file_exits_2() {
    let out = bin().arg("run").arg("/no/such/scenario.toml").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!stderr(&out).is_empty());
}

#[test]
fn malformed_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[scenario]\nname = \"broken\"\n# missing everything else\n").unwrap();
    let out = bin().arg("run").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!stderr(&out).is_empty());
}

#[test]
fn invalid_scenario_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // Parses, but the pool cannot hold the subscribers' birth pseudonyms.
    let bad = dir.path().join("tiny_pool.toml");
    std::fs::write(
        &bad,
        r#"
[scenario]
name = "tiny-pool"
seed = 1
duration = 100

[home_network]
mcc = "244"
mnc = "99"
pool_digits = 1
cap_c = 4

[[serving_networks]]
id = "lte-1"
flavor = "lte"

[subscribers]
count = 50

[workload]
events = 10
"#,
    )
    .unwrap();
    let out = bin().arg("run").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(!stderr(&out).is_empty());
}

#[test]
fn billing_rejects_artifacts_from_different_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for seed in ["5", "6"] {
        let trace = dir.path().join(format!("trace-s{seed}.jsonl"));
        let hn_log = dir.path().join(format!("hn-s{seed}.jsonl"));
        let out = bin()
            .arg("run")
            .arg(scenario("stale_guti_billing"))
            .args(["--seed", seed])
            .arg("--trace-out")
            .arg(&trace)
            .arg("--hn-log-out")
            .arg(&hn_log)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        paths.push((trace, hn_log));
    }
    // Trace from seed 5 against the allocation log from seed 6.
    let out = bin()
        .arg("billing")
        .arg(&paths[0].0)
        .arg(&paths[1].1)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "mismatched artifacts accepted");
    assert!(stderr(&out).contains("run"), "{}", stderr(&out));
}

#[test]
fn billing_on_garbage_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let hn_log = dir.path().join("hn.jsonl");
    std::fs::write(&trace, "not json\n").unwrap();
    std::fs::write(&hn_log, "{}\n").unwrap();
    let out = bin().arg("billing").arg(&trace).arg(&hn_log).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sizing_rejects_impossible_occupancy() {
    for occ in ["1.0", "-0.25", "nan"] {
        let out = bin().args(["sizing", "--occupancy", occ]).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "occupancy {occ} accepted");
    }
}

#[test]
fn sizing_validate_reports_measured_tries() {
    let out = bin()
        .args([
            "sizing",
            "--occupancy",
            "0.5",
            "--validate",
            "--draws",
            "2000",
            "--pool-digits",
            "3",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let line = text
        .lines()
        .find(|l| l.starts_with("measured allocation tries "))
        .expect("measurement line");
    let measured: f64 = line
        .strip_prefix("measured allocation tries ")
        .unwrap()
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((measured - 2.0).abs() < 0.5, "{line}");
}
