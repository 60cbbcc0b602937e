//! End-to-end tests of the binary: verdict protocol, exit codes, stats
//! records, ablation table.

use std::path::{Path, PathBuf};
use std::process::Output;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_relusat")
}

fn run(args: &[&str]) -> Output {
    std::process::Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_fixture(dir: &Path, net: &str, prop: &str) -> (PathBuf, PathBuf) {
    let net_path = dir.join("net.json");
    let prop_path = dir.join("prop.vnnlib");
    std::fs::write(&net_path, net).unwrap();
    std::fs::write(&prop_path, prop).unwrap();
    (net_path, prop_path)
}

const RELU_NET: &str =
    r#"{"layers":[{"weights":[[1.0]],"biases":[0.0]},{"weights":[[1.0]],"biases":[0.0]}]}"#;

fn unsat_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    // y = ReLU(x) >= 0 > -1 on [-1, 1]: valid.
    write_fixture(
        dir,
        RELU_NET,
        "(declare-const X_0 Real)(declare-const Y_0 Real)\
         (assert (<= X_0 1.0))(assert (>= X_0 -1.0))(assert (>= Y_0 -1.0))",
    )
}

fn sat_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    // y <= 0.5 fails for x near 1.
    write_fixture(
        dir,
        RELU_NET,
        "(declare-const X_0 Real)(declare-const Y_0 Real)\
         (assert (<= X_0 1.0))(assert (>= X_0 -1.0))(assert (<= Y_0 0.5))",
    )
}

#[test]
fn unsat_prints_verdict_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (net, prop) = unsat_fixture(dir.path());
    let out = run(&["verify", "--net", net.to_str().unwrap(), "--prop", prop.to_str().unwrap()]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().next(), Some("unsat"));
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn sat_prints_witness_that_reproduces_violation() {
    let dir = tempfile::tempdir().unwrap();
    let (net, prop) = sat_fixture(dir.path());
    let out = run(&["verify", "--net", net.to_str().unwrap(), "--prop", prop.to_str().unwrap()]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("sat"));
    assert_eq!(out.status.code(), Some(1));

    // Reparse the witness lines (x_i = value) and re-run inference.
    let witness: Vec<f64> = lines
        .map(|l| {
            let (name, value) = l.split_once(" = ").expect("witness line");
            assert!(name.starts_with("x_"));
            value.parse().unwrap()
        })
        .collect();
    assert_eq!(witness.len(), 1);
    let network =
        relusat_core::parse_network(&std::fs::read_to_string(&net).unwrap()).unwrap();
    let y = network.infer(&witness).unwrap();
    assert!(y[0] > 0.5 + 1e-6, "printed witness fails to violate: y = {y:?}");
}

#[test]
fn beam_zero_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (net, prop) = unsat_fixture(dir.path());
    let out = run(&[
        "verify",
        "--net",
        net.to_str().unwrap(),
        "--prop",
        prop.to_str().unwrap(),
        "--beam",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!String::from_utf8(out.stderr).unwrap().is_empty());
}

#[test]
fn missing_file_exits_three_with_stderr() {
    let out = run(&["verify", "--net", "/nonexistent.json", "--prop", "/nonexistent.vnnlib"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr).unwrap().contains("error"));
}

#[test]
fn unknown_flag_exits_three() {
    let out = run(&["verify", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn stats_record_reparses_to_equal_value() {
    let dir = tempfile::tempdir().unwrap();
    let (net, prop) = unsat_fixture(dir.path());
    let stats = dir.path().join("record.json");
    let out = run(&[
        "verify",
        "--net",
        net.to_str().unwrap(),
        "--prop",
        prop.to_str().unwrap(),
        "--stats",
        stats.to_str().unwrap(),
        "--seed",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&stats).unwrap();
    let record: relusat_cli::RunRecord = serde_json::from_str(&text).unwrap();
    let reserialized = serde_json::to_string_pretty(&record).unwrap();
    let reparsed: relusat_cli::RunRecord = serde_json::from_str(&reserialized).unwrap();
    assert_eq!(record, reparsed);
    assert_eq!(record.verdict, "unsat");
    assert_eq!(record.config.seed, 5);
}

#[test]
fn identical_argv_and_seed_give_identical_counters() {
    let dir = tempfile::tempdir().unwrap();
    let (net, prop) = write_fixture(
        dir.path(),
        r#"{"layers":[{"weights":[[0.7,-0.4],[0.3,0.8]],"biases":[0.1,-0.2]},
                      {"weights":[[0.5,-0.6],[-0.7,0.2]],"biases":[0.05,0.0]},
                      {"weights":[[1.0,-1.0]],"biases":[0.0]}]}"#,
        "(declare-const X_0 Real)(declare-const X_1 Real)(declare-const Y_0 Real)\
         (assert (<= X_0 1.5))(assert (>= X_0 -1.5))(assert (<= X_1 1.0))(assert (>= X_1 -1.0))\
         (assert (>= Y_0 -0.35))",
    );
    let mut records = Vec::new();
    for i in 0..2 {
        let stats = dir.path().join(format!("r{i}.json"));
        let out = run(&[
            "verify",
            "--net",
            net.to_str().unwrap(),
            "--prop",
            prop.to_str().unwrap(),
            "--stats",
            stats.to_str().unwrap(),
            "--seed",
            "42",
            "--beam",
            "4",
            "--stabilize-k",
            "2",
        ]);
        assert!(out.status.code().is_some());
        let record: relusat_cli::RunRecord =
            serde_json::from_str(&std::fs::read_to_string(&stats).unwrap()).unwrap();
        records.push(record);
    }
    assert_eq!(records[0].verdict, records[1].verdict);
    assert_eq!(records[0].stats.discrete(), records[1].stats.discrete());
    assert_eq!(records[0].counterexample, records[1].counterexample);
}

#[test]
fn ablation_empty_manifest_prints_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.csv");
    std::fs::write(&manifest, "").unwrap();
    let out = run(&["ablation", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    // Header plus one row per requested configuration, all 0/0.
    assert_eq!(stdout.lines().count(), 1 + 6);
    assert!(stdout.lines().skip(1).all(|l| l.contains(" 0 ") || l.contains("0.00")));
}

#[test]
fn ablation_trivial_instances_all_solved() {
    let dir = tempfile::tempdir().unwrap();
    let (net, prop) = unsat_fixture(dir.path());
    let manifest = dir.path().join("manifest.csv");
    std::fs::write(
        &manifest,
        format!("{},{}\n", net.display(), prop.display()),
    )
    .unwrap();
    let out = run(&[
        "ablation",
        "--manifest",
        manifest.to_str().unwrap(),
        "--timeout",
        "30",
        "--configs",
        "N,P+S",
        "--beam",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = stdout.lines().skip(1).collect();
    assert_eq!(rows.len(), 2, "row count = configurations requested");
    for row in rows {
        let solved: usize = row.split_whitespace().nth(1).unwrap().parse().unwrap();
        assert_eq!(solved, 1, "row: {row}");
    }
}

#[test]
fn oracle_subcommand_agrees_with_verify() {
    let dir = tempfile::tempdir().unwrap();
    let (net, prop) = sat_fixture(dir.path());
    let out = run(&["oracle", "--net", net.to_str().unwrap(), "--prop", prop.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().next(), Some("sat"));
}

#[test]
fn gen_writes_parsable_corpus_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("corpus");
    let out = run(&[
        "gen",
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--seed",
        "3",
        "--count",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let manifest_path = String::from_utf8(out.stdout).unwrap().trim().to_string();
    let manifest = std::fs::read_to_string(&manifest_path).unwrap();
    assert!(!manifest.is_empty());
    for line in manifest.lines() {
        let (net, prop) = line.split_once(',').unwrap();
        relusat_core::parse_network(&std::fs::read_to_string(net).unwrap()).unwrap();
        relusat_core::parse_property(&std::fs::read_to_string(prop).unwrap()).unwrap();
    }
}
