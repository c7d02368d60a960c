//! End-to-end behaviour of the binary: exit codes, output shape, reproducibility.

use std::process::{Command, Output};

use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maxplus-tails")).args(args).output().expect("binary runs")
}

fn configs(name: &str) -> String {
    format!("{}/../../configs/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

fn result(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_slice(&out.stdout).expect("stdout is JSON");
    doc["result"].clone()
}

#[test]
fn bundled_configs_validate() {
    for name in ["single_server", "tandem_identical", "tandem_independent", "fork_join", "resequencing"] {
        let out = bin(&["validate", &configs(name)]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn bottom_diagonal_is_a_validation_failure() {
    let out = bin(&["validate", &configs("bad_diagonal")]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("(ST)"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn usage_errors_exit_64() {
    for args in [&["theta", "--bogus"][..], &["mgf"][..], &["frobnicate"][..], &["--threads", "0", "theta", "--builtin", "mm1"][..]] {
        assert_eq!(bin(args).status.code(), Some(64), "{args:?}");
    }
    assert_eq!(bin(&["theta", "--builtin", "nope"]).status.code(), Some(1));
}

#[test]
fn tandem_below_half_load_is_capped_by_eta() {
    let r = result(&bin(&["theta", "--builtin", "tandem_identical", "--mu", "1", "--lambda", "0.4"]));
    assert!((r["theta_star"].as_f64().unwrap() - 0.5).abs() <= 1e-9);
    assert_eq!(r["binding"], "eta");
    assert_eq!(r["eta"].as_f64(), Some(0.5));
}

#[test]
fn unit_degree_network_reports_infinite_effective_eta() {
    let r = result(&bin(&["theta", "--builtin", "fork_join"]));
    assert_eq!(r["eta_effective"], "inf");
    assert_eq!(r["corollary"]["holds"], true);
    assert!((r["theta_star"].as_f64().unwrap() - 0.3).abs() <= 1e-9);
}

#[test]
fn reruns_are_byte_identical() {
    let args = ["simulate", "--builtin", "tandem_independent", "--replicas", "500", "--seed", "4"];
    let (a, b) = (bin(&args), bin(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let other = bin(&["simulate", "--builtin", "tandem_independent", "--replicas", "500", "--seed", "5"]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn thread_count_does_not_change_output() {
    let cases: [&[&str]; 3] = [
        &["simulate", "--builtin", "fork_join", "--replicas", "2000"],
        &["mgf", "--builtin", "resequencing", "--replicas", "2000", "--points", "4"],
        &["theta", "--builtin", "tandem_independent", "--method", "empirical-only", "--mgf-replicas", "2000", "--points", "8"],
    ];
    for args in cases {
        let one = bin(&[&["--threads", "1"][..], args].concat());
        let four = bin(&[&["--threads", "4"][..], args].concat());
        assert!(one.status.success(), "{args:?}: {}", String::from_utf8_lossy(&one.stderr));
        assert_eq!(one.stdout, four.stdout, "{args:?}");
    }
}

#[test]
fn csv_output_carries_the_manifest() {
    let path = std::env::temp_dir().join(format!("maxplus-tails-cli-{}.csv", std::process::id()));
    let out = bin(&["mgf", "--builtin", "mm1", "--block", "1", "--replicas", "1000", "--points", "5", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# manifest: {"));
    assert_eq!(lines.next(), Some("theta,lambda_hat,ci,flag"));
    assert_eq!(lines.count(), 5);
}

#[test]
fn optimize_closed_form_and_clamp() {
    let r = result(&bin(&["optimize", "--mu2", "1", "--mu3", "1", "--lambda", "1"]));
    assert!((r["p"].as_f64().unwrap() - 0.5).abs() <= 1e-12);
    let numeric = result(&bin(&["optimize", "--mu2", "1.2", "--mu3", "0.8", "--lambda", "1", "--numeric"]));
    assert!((numeric["p"].as_f64().unwrap() - 0.7).abs() <= 1e-6);
    assert_eq!(numeric["method"], "golden_section");
}

#[test]
fn unstable_load_is_refused() {
    let out = bin(&["simulate", "--builtin", "mm1", "--lambda", "1.2", "--replicas", "100"]);
    assert_eq!(out.status.code(), Some(2));
}
