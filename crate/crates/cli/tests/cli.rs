use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pdtn_core::io::{to_json_string, GraphFile};
use pdtn_core::{bounds_report, validate, SolverConfig};
use tempfile::TempDir;

fn pdtn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdtn"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn p3_setup() -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let o = pdtn(dir.path(), &["gen", "path", "3", "--out", "p3.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    std::fs::write(dir.path().join("f.csv"), "id,value\na,0\nc,1\n").unwrap();
    let path = dir.path().to_path_buf();
    (dir, path)
}

#[test]
fn p3_dirichlet_solution() {
    let (_keep, dir) = p3_setup();
    let o = pdtn(
        &dir,
        &[
            "dirichlet",
            "--graph",
            "p3.json",
            "--data",
            "f.csv",
            "--p",
            "2",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l == "b,0.5"), "{out}");
}

#[test]
fn p3_dtn_functional() {
    let (_keep, dir) = p3_setup();
    let o = pdtn(&dir, &["dtn", "--graph", "p3.json", "--data", "f.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "id,weight\na,-0.5\nc,0.5\n");
}

#[test]
fn solve_summary_goes_to_stdout_when_csv_goes_to_file() {
    let (_keep, dir) = p3_setup();
    let o = pdtn(
        &dir,
        &[
            "dirichlet",
            "--graph",
            "p3.json",
            "--data",
            "f.csv",
            "--out",
            "u.csv",
            "--report",
            "r.json",
        ],
    );
    assert!(o.status.success());
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["energy"].as_f64(), Some(0.5));
    assert_eq!(summary["converged"].as_bool(), Some(true));
    assert_eq!(
        std::fs::read_to_string(dir.join("r.json")).unwrap(),
        stdout(&o)
    );
    assert!(std::fs::read_to_string(dir.join("u.csv"))
        .unwrap()
        .contains("b,0.5"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let o = pdtn(dir.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(&err).unwrap();
    assert_eq!(v["error"], "usage");
    assert!(v["message"].as_str().unwrap().contains("Usage"));
}

#[test]
fn functional_must_sum_to_zero_unless_renormalized() {
    let (_keep, dir) = p3_setup();
    std::fs::write(dir.join("l.csv"), "id,weight\na,1\nc,0\n").unwrap();
    let o = pdtn(&dir, &["ntd", "--graph", "p3.json", "--data", "l.csv"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stderr(&o)).unwrap();
    assert_eq!(v["error"], "not_sum_zero");
    let o = pdtn(
        &dir,
        &[
            "ntd",
            "--graph",
            "p3.json",
            "--data",
            "l.csv",
            "--renormalize",
        ],
    );
    assert!(o.status.success());
}

#[test]
fn input_errors_exit_1() {
    let (_keep, dir) = p3_setup();
    std::fs::write(dir.join("bad.csv"), "id,value\na,0\nzz,1\n").unwrap();
    for args in [
        vec!["dirichlet", "--graph", "missing.json", "--data", "f.csv"],
        vec!["dirichlet", "--graph", "p3.json", "--data", "bad.csv"],
        vec![
            "dirichlet",
            "--graph",
            "p3.json",
            "--data",
            "f.csv",
            "--p",
            "0.5",
        ],
        vec!["dirichlet", "--graph", "p3.json"],
        vec!["gen", "grid", "2"],
    ] {
        let o = pdtn(&dir, &args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(serde_json::from_str::<serde_json::Value>(&stderr(&o)).is_ok());
    }
}

#[test]
fn non_convergence_exits_2() {
    let dir = TempDir::new().unwrap();
    let o = pdtn(dir.path(), &["gen", "grid", "5", "--out", "g.json"]);
    assert!(o.status.success());
    let file = GraphFile::read(dir.path().join("g.json")).unwrap();
    let mut csv = String::from("id,value\n");
    for (k, v) in file.vertices.iter().filter(|v| v.boundary).enumerate() {
        csv.push_str(&format!("{},{}\n", v.id, (k as f64 * 0.7).sin()));
    }
    std::fs::write(dir.path().join("f.csv"), csv).unwrap();
    let o = pdtn(
        dir.path(),
        &[
            "dirichlet",
            "--graph",
            "g.json",
            "--data",
            "f.csv",
            "--p",
            "3",
            "--max-iter",
            "1",
        ],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stderr(&o)).unwrap();
    assert_eq!(v["error"], "not_converged");
}

#[test]
fn norms_output_equals_library_report() {
    let (_keep, dir) = p3_setup();
    let o = pdtn(&dir, &["norms", "--graph", "p3.json", "--theta", "0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let file = GraphFile::read(dir.join("p3.json")).unwrap();
    let graph = file.graph().unwrap();
    let params = pdtn_core::BesovParams::from_theta(2.0, 0.5).unwrap();
    let report = bounds_report(&graph, params, &SolverConfig::new(2.0)).unwrap();
    assert_eq!(stdout(&o), to_json_string(&report).unwrap());
    let parsed: pdtn_core::NormReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(parsed, report);
}

#[test]
fn generated_files_are_deterministic_and_valid() {
    let dir = TempDir::new().unwrap();
    for (kind, size) in [
        ("path", "4"),
        ("grid", "4"),
        ("lshape", "5"),
        ("snowflake", "1"),
    ] {
        let a = pdtn(dir.path(), &["gen", kind, size]);
        let b = pdtn(dir.path(), &["gen", kind, size]);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout);
        let file = GraphFile::from_json(&stdout(&a)).unwrap();
        assert!(validate(&file.vertices, &file.edges).passed(), "{kind}");
        std::fs::write(dir.path().join("g.json"), &a.stdout).unwrap();
        let v = pdtn(dir.path(), &["validate", "--graph", "g.json"]);
        assert!(v.status.success());
        assert!(stdout(&v).contains("\"passed\": true"));
    }
}

#[test]
fn diagnose_plot_data_is_sorted_by_radius() {
    let dir = TempDir::new().unwrap();
    assert!(pdtn(dir.path(), &["gen", "grid", "5", "--out", "g.json"])
        .status
        .success());
    let o = pdtn(
        dir.path(),
        &[
            "diagnose",
            "--graph",
            "g.json",
            "--emit-plot-data",
            "scan.csv",
            "--restarts",
            "2",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(report["doubling_mu"].as_f64().unwrap() >= 1.0);
    let scan = std::fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    let xs: Vec<f64> = scan
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(!xs.is_empty());
    assert!(xs.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn roundtrip_report() {
    let (_keep, dir) = p3_setup();
    let o = pdtn(&dir, &["roundtrip", "--graph", "p3.json", "--trials", "3"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["trials"], 3);
    assert!(v["ntd_after_dtn"].as_f64().unwrap() <= 1e-8);
    assert!(v["dtn_after_ntd"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn invalid_graph_fails_validation() {
    let dir = TempDir::new().unwrap();
    let text = r#"{"params": {"p": 2}, "vertices": [
        {"id": "a", "boundary": true, "nu": 1},
        {"id": "b", "boundary": false, "mu": 1},
        {"id": "c", "boundary": true, "nu": 1}],
        "edges": [{"u": "a", "v": "b", "length": -1, "mu": 1}, {"u": "b", "v": "c", "length": 1, "mu": 1}]}"#;
    std::fs::write(dir.path().join("bad.json"), text).unwrap();
    let o = pdtn(dir.path(), &["validate", "--graph", "bad.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("nonpositive length"));
}
