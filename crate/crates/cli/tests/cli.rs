use std::path::PathBuf;
use std::process::{Command, Output};

fn pdip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdip")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn records(text: &str) -> Vec<serde_json::Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn same_seed_gives_identical_bytes() {
    let args = ["--seed", "5", "sample-pdip", "--alpha", "0.5", "--theta", "0.5", "--n", "20"];
    let a = stdout(&pdip(&args));
    let b = stdout(&pdip(&args));
    assert_eq!(a, b);
    let c = stdout(&pdip(&["--seed", "6", "sample-pdip", "--alpha", "0.5", "--theta", "0.5", "--n", "20"]));
    assert_ne!(a, c);
    let recs = records(&a);
    assert_eq!(recs.len(), 20);
    assert!(recs.iter().all(|r| (r["mass"].as_f64().unwrap() - 1.0).abs() < 1e-9));
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let run = |threads: &str| {
        stdout(&pdip(&[
            "--seed", "9", "--threads", threads, "evolve", "--alpha", "0.4", "--theta", "0.7", "--levels", "0.1,0.3", "--reps", "40",
        ]))
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = pdip(&["sample-pdip", "--alpha", "0.5", "--theta", "0.5", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let out = pdip(&["sample-pdip", "--alpha", "1.5", "--theta", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn explicit_flags_override_config() {
    let cfg = scratch("sample.json", r#"{"alpha": 0.3, "theta": 1.0, "n": 3}"#);
    let cfg = cfg.to_str().unwrap();
    assert_eq!(records(&stdout(&pdip(&["--config", cfg, "sample-pdip"]))).len(), 3);
    assert_eq!(records(&stdout(&pdip(&["--config", cfg, "sample-pdip", "--n", "5"]))).len(), 5);
}

#[test]
fn moments_on_a_partition_file() {
    let p = scratch("three.json", r#"{"mass": 1.0, "blocks": [[0.0, 0.5], [0.5, 0.8], [0.8, 1.0]]}"#);
    let p = p.to_str().unwrap();
    let out = stdout(&pdip(&["moments", "--sigma", "2", "--partition", p, "--generator", "--alpha", "0.5", "--theta", "0.5"]));
    let value = |text: &str| records(text)[0]["value"].as_f64().unwrap();
    assert!((value(&out) + 0.14).abs() < 1e-12);
    assert!((value(&stdout(&pdip(&["moments", "--sigma", "2", "--partition", p]))) - 0.38).abs() < 1e-12);
    let lens = scratch("lens.json", r#"{"lengths": [0.5, 0.3, 0.2]}"#);
    let again = stdout(&pdip(&["moments", "--sigma", "2", "--partition", lens.to_str().unwrap(), "--generator", "--alpha", "0.5", "--theta", "0.5"]));
    assert_eq!(out, again);
}

#[test]
fn csv_output_has_a_version_header() {
    let out = stdout(&pdip(&["--format", "csv", "sample-pdip", "--alpha", "0.5", "--theta", "0.5", "--n", "2"]));
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("# pdip-csv v1"));
    assert!(lines.next().unwrap().starts_with("rep,"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn check_exit_codes_follow_the_verdict() {
    let pass = pdip(&["--seed", "1", "check", "total-mass", "--reps", "4000"]);
    assert_eq!(pass.status.code(), Some(0), "{}", String::from_utf8_lossy(&pass.stdout));
    // The α/y dust-clade rate gives extinction probability e^{-αz/y} instead of e^{-z/2y}.
    let fail = pdip(&["--seed", "1", "check", "dust-entrance", "--alpha", "0.1", "--reps", "20000", "--dust-rate", "alpha-over-level"]);
    assert_eq!(fail.status.code(), Some(1), "{}", String::from_utf8_lossy(&fail.stdout));
}

#[test]
fn updown_states_have_the_chain_size() {
    let out = stdout(&pdip(&["--seed", "2", "updown", "--n", "6", "--alpha", "0.5", "--theta", "0.5", "--steps", "50"]));
    let recs = records(&out);
    assert!(!recs.is_empty());
    for r in recs {
        let c: u32 = r["composition"].as_str().unwrap().trim_matches(['(', ')']).split(',').map(|x| x.parse::<u32>().unwrap()).sum();
        assert_eq!(c, 6);
    }
}
