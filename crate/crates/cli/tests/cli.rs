//! End-to-end tests of the `alosim` binary: output shapes, exit codes, and
//! per-command determinism, all against the bundled fixtures.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use alosim::fock::{count_phi, FockState};
use alosim::{AdaptiveInterferometer, ComplexMatrix, Interferometer};
use serde_json::Value;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_alosim")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary should spawn")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json_lines(text: &str) -> Vec<Value> {
    text.lines()
        .filter(|line| !line.trim().is_empty())
        .map(|line| serde_json::from_str(line).expect("line should be JSON"))
        .collect()
}

fn hom() -> String {
    fixture("hom.json").display().to_string()
}

fn toy() -> String {
    fixture("toy.csv").display().to_string()
}

#[test]
fn prob_reports_the_interference_cancellation() {
    let text = run_ok(&["prob", "--input", &hom(), "--outcome", "1,1", "--outcome", "2,0"]);
    let rows = json_lines(&text);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["state"], serde_json::json!([1, 1]));
    assert_eq!(rows[0]["prob"].as_f64().unwrap(), 0.0);
    assert_eq!(rows[1]["state"], serde_json::json!([2, 0]));
    assert!((rows[1]["prob"].as_f64().unwrap() - 0.5).abs() <= 1e-12);
}

#[test]
fn prob_without_outcomes_prints_a_normalized_table() {
    let text = run_ok(&["prob", "--input", &hom()]);
    let table: Value = serde_json::from_str(&text).unwrap();
    // The final outcome space spans every photon sector |s| <= n.
    let entries = table["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 6);
    let total: f64 = entries.iter().map(|e| e["prob"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() <= 1e-12);
    assert_eq!(table["context"]["m"], 2);
    assert_eq!(table["context"]["n"], 2);
}

#[test]
fn simulate_emits_the_joint_table() {
    let text = run_ok(&["simulate", "--input", &hom()]);
    let rows = json_lines(&text);
    assert_eq!(rows.len(), 3);
    let total: f64 = rows.iter().map(|r| r["prob"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() <= 1e-12);
    for row in &rows {
        assert_eq!(row["p"], serde_json::json!([]));
    }
}

#[test]
fn overlap_of_identical_heralded_states_is_unity() {
    let text =
        run_ok(&["overlap", "--input", &hom(), "--outcome-p", "", "--outcome-q", ""]);
    let row: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(row["overlap"].as_f64().unwrap(), 1.0);
}

#[test]
fn sample_streams_shot_records_deterministically() {
    let args = ["sample", "--input", &hom(), "--shots", "50", "--seed", "9"];
    let first = run_ok(&args);
    let second = run_ok(&args);
    assert_eq!(first, second);
    let rows = json_lines(&first);
    assert_eq!(rows.len(), 50);
    for row in &rows {
        let s: Vec<u64> =
            row["s"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
        assert_eq!(s.iter().sum::<u64>(), 2, "photon number is conserved");
    }
}

#[test]
fn out_flag_writes_the_stdout_bytes_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dist.json");
    let stdout = run_ok(&["prob", "--input", &hom()]);
    let piped = run_ok(&["prob", "--input", &hom(), "--out", path.to_str().unwrap()]);
    assert!(piped.is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), stdout);
}

#[test]
fn kernel_chain_classifies_the_toy_set() {
    let dir = tempfile::tempdir().unwrap();
    let gram = dir.path().join("gram.json");
    let model = dir.path().join("model.json");
    let toy = toy();
    let geometry = ["--modes", "3", "--photons", "2", "--adaptive-modes", "1"];

    let mut args = vec!["kernel", "--data", &toy, "--out", gram.to_str().unwrap()];
    args.extend_from_slice(&geometry);
    run_ok(&args);

    run_ok(&[
        "svm-train",
        "--gram",
        gram.to_str().unwrap(),
        "--data",
        &toy,
        "--lambda",
        "0.01",
        "--out",
        model.to_str().unwrap(),
    ]);

    let mut args = vec![
        "svm-predict",
        "--model",
        model.to_str().unwrap(),
        "--data",
        &toy,
        "--points",
        &toy,
    ];
    args.extend_from_slice(&geometry);
    let rows = json_lines(&run_ok(&args));
    let labels: Vec<i64> = rows.iter().map(|r| r["label"].as_i64().unwrap()).collect();
    assert_eq!(labels, vec![1, -1, 1, -1, 1, -1]);
}

#[test]
fn estimated_kernel_is_deterministic_per_seed() {
    let args = [
        "kernel",
        "--data",
        &toy(),
        "--modes",
        "3",
        "--photons",
        "2",
        "--adaptive-modes",
        "1",
        "--estimate",
        "--shots",
        "500",
        "--seed",
        "4",
    ];
    let first = run_ok(&args);
    assert_eq!(first, run_ok(&args));
    let gram: Value = serde_json::from_str(&first).unwrap();
    assert_eq!(gram["provenance"]["shot_estimated"]["shots"], 500);
}

#[test]
fn explicit_train_reaches_zero_risk_on_the_toy_set() {
    let text = run_ok(&[
        "explicit-train",
        "--data",
        &toy(),
        "--modes",
        "3",
        "--photons",
        "2",
        "--adaptive-modes",
        "1",
        "--max-iterations",
        "40",
    ]);
    let outcome: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(outcome["converged"], true);
    let risks = outcome["risk_trace"].as_array().unwrap();
    assert_eq!(risks.last().unwrap().as_f64().unwrap(), 0.0);
}

#[test]
fn bench_small_grid_reports_the_expected_eval_counts() {
    let text = run_ok(&["bench", "--grid", "small", "--seed", "2"]);
    let report: Value = serde_json::from_str(&text).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert!(!rows.is_empty());
    let binom = |n: u64, r: u64| -> u64 {
        (0..r).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
    };
    for row in rows {
        let (n, k, r) = (
            row["n"].as_u64().unwrap(),
            row["k"].as_u64().unwrap(),
            row["r"].as_u64().unwrap(),
        );
        match row["task"].as_str().unwrap() {
            "overlap_structured" => {
                let c = binom(n, r);
                assert_eq!(row["permanent_evals"].as_u64().unwrap(), 3 * c * c);
            }
            "probability_exact" => {
                let terms = if k == 0 {
                    u64::from(r == 0)
                } else {
                    count_phi(k as usize, r as usize).unwrap() as u64
                };
                assert_eq!(row["permanent_evals"].as_u64().unwrap(), terms);
            }
            "probability_estimate" => {
                assert!(row["estimator_samples"].as_u64().unwrap() > 0);
            }
            other => panic!("unexpected task {other}"),
        }
    }
    // The structured-overlap cost depends on (n, r) only, never on k.
    let mut by_nr: std::collections::BTreeMap<(u64, u64), u64> = Default::default();
    for row in rows.iter().filter(|r| r["task"] == "overlap_structured") {
        let key = (row["n"].as_u64().unwrap(), row["r"].as_u64().unwrap());
        let evals = row["permanent_evals"].as_u64().unwrap();
        assert_eq!(*by_nr.entry(key).or_insert(evals), evals);
    }
}

fn mask_wall_times(text: &str) -> String {
    let marker = "\"wall_time_s\":";
    let mut out = String::new();
    let mut rest = text;
    while let Some(pos) = rest.find(marker) {
        let tail = &rest[pos + marker.len()..];
        out.push_str(&rest[..pos + marker.len()]);
        out.push('X');
        let end = tail.find([',', '}']).expect("number is followed by , or }");
        rest = &tail[end..];
    }
    out.push_str(rest);
    out
}

#[test]
fn bench_is_deterministic_apart_from_wall_times() {
    let args = ["bench", "--grid", "small", "--seed", "2"];
    let first = mask_wall_times(&run_ok(&args));
    let second = mask_wall_times(&run_ok(&args));
    assert_eq!(first, second);
}

#[test]
fn threads_flag_does_not_change_results() {
    let base = [
        "kernel",
        "--data",
        &toy(),
        "--modes",
        "3",
        "--photons",
        "2",
        "--adaptive-modes",
        "1",
    ];
    let mut single: Vec<&str> = base.to_vec();
    single.extend_from_slice(&["--threads", "1"]);
    assert_eq!(run_ok(&base), run_ok(&single));
}

#[test]
fn missing_input_exits_with_the_input_error_code() {
    let out = run(&["prob", "--input", "/nonexistent/circuit.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_circuit_exits_with_the_input_error_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"m\": 2").unwrap();
    let out = run(&["prob", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn wrong_outcome_width_exits_with_the_input_error_code() {
    let out = run(&["prob", "--input", &hom(), "--outcome", "1,1,1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oversized_outcome_spaces_exit_with_the_capacity_code() {
    // Phi(30, 8) has ~3.9e7 states, above the sampler's table cap.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wide.json");
    let circuit =
        AdaptiveInterferometer::non_adaptive(8, Interferometer::new(ComplexMatrix::identity(30)).unwrap())
            .unwrap();
    std::fs::write(&path, serde_json::to_string(&circuit).unwrap()).unwrap();
    let out = run(&["sample", "--input", path.to_str().unwrap(), "--shots", "1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn starved_overlap_estimation_exits_with_the_starvation_code() {
    let out = run(&[
        "overlap",
        "--input",
        &hom(),
        "--outcome-p",
        "",
        "--outcome-q",
        "",
        "--estimate",
        "--shots",
        "10",
        "--budget",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn solver_update_caps_exit_with_the_nonconvergence_code() {
    let dir = tempfile::tempdir().unwrap();
    let gram = dir.path().join("gram.json");
    run_ok(&[
        "kernel",
        "--data",
        &toy(),
        "--modes",
        "3",
        "--photons",
        "2",
        "--adaptive-modes",
        "1",
        "--out",
        gram.to_str().unwrap(),
    ]);
    let out = run(&[
        "svm-train",
        "--gram",
        gram.to_str().unwrap(),
        "--data",
        &toy(),
        "--lambda",
        "0.01",
        "--max-updates",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn circuit_files_round_trip_through_serde() {
    let text = std::fs::read_to_string(fixture("hom.json")).unwrap();
    let circuit: AdaptiveInterferometer = serde_json::from_str(&text).unwrap();
    let reserialized = serde_json::to_string(&circuit).unwrap();
    let reparsed: AdaptiveInterferometer = serde_json::from_str(&reserialized).unwrap();
    assert_eq!(circuit, reparsed);
    assert_eq!(circuit.input_state(), FockState::new(vec![1, 1]));
}
