//! Black-box tests of the command-line interface: exit codes, file
//! outputs, and rerun reproducibility.

use std::path::Path;
use std::process::{Command, Output};

fn conga(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conga"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn empty_data_file_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("empty.csv");
    std::fs::write(&data, "").unwrap();
    let out = conga(&[
        "fit",
        "--data",
        path_str(&data),
        "--out",
        path_str(&dir.path().join("out")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn malformed_cell_reports_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    std::fs::write(&data, "1,2\n3,x\n").unwrap();
    let out = conga(&[
        "fit",
        "--data",
        path_str(&data),
        "--out",
        path_str(&dir.path().join("out")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains('2'), "no position info in: {msg}");
}

#[test]
fn count_above_truncation_level_is_a_numeric_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("big.csv");
    std::fs::write(&data, "1,2\n3,500\n0,1\n").unwrap();
    let out = conga(&[
        "fit",
        "--data",
        path_str(&data),
        "--out",
        path_str(&dir.path().join("out")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("500"), "offending count not named: {msg}");
}

#[test]
fn simulate_writes_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sim");
    let out = conga(&[
        "simulate",
        "--p",
        "10",
        "--n",
        "100",
        "--seed",
        "4",
        "--out",
        path_str(&out_dir),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(out_dir.join("data.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 100);
    assert!(rows.iter().all(|r| r.split(',').count() == 10));
    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("truth.json")).unwrap())
            .unwrap();
    assert_eq!(truth["p"], 10);
}

#[test]
fn near_empty_graph_probability_gives_empty_truth() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sim");
    let out = conga(&[
        "simulate",
        "--p",
        "4",
        "--n",
        "10",
        "--seed",
        "1",
        "--edge-prob",
        "0.0001",
        "--out",
        path_str(&out_dir),
    ]);
    assert!(out.status.success());
    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("truth.json")).unwrap())
            .unwrap();
    assert_eq!(truth["edges"].as_array().unwrap().len(), 0);
}

#[test]
fn compare_same_fit_is_fully_similar() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("samples.json");
    let json = serde_json::json!({
        "p": 2,
        "beta": [[0.1], [-0.2], [0.05], [-0.15]],
        "m": [[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0]],
        "diagnostics": [],
    });
    std::fs::write(&samples, serde_json::to_string(&json).unwrap()).unwrap();
    let out_dir = dir.path().join("cmp");
    let out = conga(&[
        "compare",
        "--a",
        path_str(&samples),
        "--b",
        path_str(&samples),
        "--out",
        path_str(&out_dir),
    ]);
    assert!(out.status.success());
    let cmp: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("differences.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(cmp["similarity"], 1.0);
}

#[test]
fn compare_flags_sign_disjoint_edge() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let make = |center: f64| {
        serde_json::json!({
            "p": 2,
            "beta": (0..50).map(|i| vec![center + 0.001 * i as f64]).collect::<Vec<_>>(),
            "m": Vec::<Vec<f64>>::new(),
            "diagnostics": [],
        })
    };
    std::fs::write(&a, serde_json::to_string(&make(1.0)).unwrap()).unwrap();
    std::fs::write(&b, serde_json::to_string(&make(-1.0)).unwrap()).unwrap();
    let out_dir = dir.path().join("cmp");
    let out = conga(&[
        "compare",
        "--a",
        path_str(&a),
        "--b",
        path_str(&b),
        "--out",
        path_str(&out_dir),
    ]);
    assert!(out.status.success());
    let cmp: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("differences.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(cmp["differences"][0]["flagged"], true);
    assert_eq!(cmp["similarity"], 0.0);
}

#[test]
fn theta_curve_has_grid_point_rows_and_flags_degenerate_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("const.csv");
    std::fs::write(&data, "2,2\n2,2\n2,2\n").unwrap();
    let out_dir = dir.path().join("theta");
    let out = conga(&[
        "theta",
        "--data",
        path_str(&data),
        "--grid-points",
        "50",
        "--out",
        path_str(&out_dir),
    ]);
    assert!(out.status.success());
    let curve = std::fs::read_to_string(out_dir.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 51); // header + one row per grid point
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("theta.json")).unwrap())
            .unwrap();
    assert_eq!(report["degenerate"], true);
    assert_eq!(report["theta"], 0.05);
}

#[test]
fn benchmark_single_replication_reproducible_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &Path| {
        let st = conga(&[
            "benchmark",
            "--preset",
            "p10",
            "--reps",
            "1",
            "--seed",
            "11",
            "--burn",
            "40",
            "--keep",
            "40",
            "--out",
            path_str(out),
        ]);
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&a);
    run(&b);
    let table_a = std::fs::read(a.join("benchmark.csv")).unwrap();
    let table_b = std::fs::read(b.join("benchmark.csv")).unwrap();
    assert_eq!(table_a, table_b);
    let text = String::from_utf8(table_a).unwrap();
    assert_eq!(text.lines().count(), 3); // header + one replication + mean
    assert!(text.lines().nth(1).unwrap().ends_with("ok"));
}

#[test]
fn fit_writes_manifest_with_stable_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    std::fs::write(&data, "1,0,2\n0,1,1\n2,2,0\n1,1,1\n0,2,1\n3,0,0\n").unwrap();
    let run = |out: &Path| {
        let st = conga(&[
            "fit",
            "--data",
            path_str(&data),
            "--seed",
            "2",
            "--burn",
            "60",
            "--keep",
            "60",
            "--out",
            path_str(out),
        ]);
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&a);
    run(&b);
    let load = |p: &Path| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(p.join("manifest.json")).unwrap())
            .unwrap()
    };
    let ma = load(&a);
    let mb = load(&b);
    assert_eq!(ma["config_hash"], mb["config_hash"]);
    assert_eq!(ma["theta"], mb["theta"]);
    // graph bytes identical even though manifests carry wall time
    assert_eq!(
        std::fs::read(a.join("graph.json")).unwrap(),
        std::fs::read(b.join("graph.json")).unwrap()
    );
}
