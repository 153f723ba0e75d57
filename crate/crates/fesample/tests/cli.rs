//! End-to-end checks of the `fesample` binary: happy paths for each
//! subcommand, the exit-code contract, and rerun determinism of artifacts.

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fesample"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary should launch")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn write_complete_model(dir: &Path) -> std::path::PathBuf {
    // Complete graph on 10 vertices, uniform weight β·n/m with β = 0.8.
    let path = dir.join("complete.txt");
    let mut lines = String::new();
    let (n, beta) = (10usize, 0.8f64);
    let m = n * (n - 1) / 2;
    let w = beta * n as f64 / m as f64;
    for i in 0..n {
        for j in (i + 1)..n {
            lines.push_str(&format!("{i} {j} {w}\n"));
        }
    }
    std::fs::write(&path, lines).unwrap();
    path
}

#[test]
fn exact_subcommand_prints_free_energy() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_complete_model(dir.path());
    let out = run(&["exact", "--model", model.to_str().unwrap()], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(
        text.contains("free_energy"),
        "missing value line in:\n{text}"
    );
}

#[test]
fn meanfield_subcommand_reports_lower_bound() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_complete_model(dir.path());
    let out = run(
        &["meanfield", "--model", model.to_str().unwrap()],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(text.contains("variational_free_energy"), "{text}");
}

#[test]
fn decompose_subcommand_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_complete_model(dir.path());
    let decomp = dir.path().join("decomp.json");
    let out = run(
        &[
            "--out",
            decomp.to_str().unwrap(),
            "decompose",
            "--model",
            model.to_str().unwrap(),
            "--epsilon",
            "0.4",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&decomp).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(
        parsed.get("cuts").is_some(),
        "decomposition JSON missing cuts: {text}"
    );
}

#[test]
fn estimate_subcommand_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_complete_model(dir.path());
    let csv = dir.path().join("estimate.csv");
    let args = [
        "--seed",
        "33",
        "--out",
        csv.to_str().unwrap(),
        "estimate",
        "--model",
        model.to_str().unwrap(),
        "--q",
        "6",
        "--repeats",
        "5",
        "--backend",
        "exact",
    ];
    let out = run(&args, dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let first = std::fs::read_to_string(&csv).unwrap();
    assert!(
        first.starts_with("repeat,q,value,rescaled_value,median_flag\n"),
        "{first}"
    );
    assert_eq!(first.lines().count(), 6);

    // Same seed, same bytes.
    let out = run(&args, dir.path());
    assert!(out.status.success());
    let second = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(
        first, second,
        "estimate CSV not reproducible under a fixed seed"
    );
}

#[test]
fn magnetize_subcommand_uses_three_calls() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_complete_model(dir.path());
    let out = run(
        &[
            "magnetize",
            "--model",
            model.to_str().unwrap(),
            "--nu",
            "0.05",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(text.contains("oracle_calls: 3"), "{text}");
    assert!(text.contains("magnetization"), "{text}");
}

#[test]
fn lowerbound_subcommand_emits_report_row() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("probe.csv");
    let out = run(
        &[
            "--seed",
            "17",
            "--out",
            csv.to_str().unwrap(),
            "lowerbound",
            "--n",
            "100",
            "--epsilon",
            "0.1",
            "--delta",
            "0.1",
            "--k",
            "10",
            "--trials",
            "2000",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("n,epsilon,delta,M,k,trials,failures,failure_rate,bound,sigma")
    );
    assert_eq!(lines.count(), 1, "expected a single data row:\n{text}");
}

#[test]
fn experiment_subcommand_verifies_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("experiments");
    let out = run(
        &[
            "--out",
            out_dir.to_str().unwrap(),
            "experiment",
            "--name",
            "concentration",
            "--verify",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(text.contains("check"), "{text}");
    assert!(out_dir.join("concentration.csv").exists());
    assert!(out_dir.join("concentration.json").exists());
}

#[test]
fn missing_model_file_is_an_operational_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["exact", "--model", "no-such-file.txt"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn bad_flags_exit_with_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["estimate", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn enumeration_guard_blocks_oversized_exact_solves() {
    let dir = tempfile::tempdir().unwrap();
    // A 30-vertex ring exceeds the default enumeration guard of 25.
    let path = dir.path().join("big.txt");
    let mut lines = String::new();
    for i in 0..29usize {
        lines.push_str(&format!("{} {} 0.01\n", i, i + 1));
    }
    lines.push_str("0 29 0.01\n");
    std::fs::write(&path, lines).unwrap();
    let out = run(&["exact", "--model", path.to_str().unwrap()], dir.path());
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains("enumeration"), "unexpected error text: {err}");
}
