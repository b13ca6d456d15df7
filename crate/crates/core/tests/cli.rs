use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use csma_core::ConflictGraph;

fn csma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csma")).args(args).output().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn save(dir: &Path, name: &str, g: &ConflictGraph) -> String {
    let p = dir.join(name);
    g.save(&p).unwrap();
    path_str(&p).to_string()
}

fn rate_column(csv_text: &str) -> Vec<f64> {
    csv_text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect()
}

#[test]
fn generate_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let out = csma(&["generate", "--n", "40", "--radius", "0.2", "--seed", "9", "--out", path_str(p)]);
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.contains("edges: ") && text.contains("max_clique: "));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(dir.path().join("a.manifest.json").exists());
}

#[test]
fn single_node_has_no_edges() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("one.json");
    let out = csma(&["generate", "--n", "1", "--radius", "0.5", "--out", path_str(&p)]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("edges: 0"));
    assert_eq!(ConflictGraph::load(&p).unwrap().edge_count(), 0);
}

#[test]
fn rates_on_path_and_triangle() {
    let dir = tempfile::tempdir().unwrap();
    let path = save(dir.path(), "path.json", &ConflictGraph::path(3));
    let out = csma(&["rates", "--graph", &path, "--targets", "list:0.2,0.3,0.2", "--method", "chordal-exact"]);
    assert!(out.status.success());
    let nu = rate_column(&String::from_utf8(out.stdout).unwrap());
    for (a, b) in nu.iter().zip([0.4, 0.84, 0.4]) {
        assert!((a - b).abs() < 1e-12, "{nu:?}");
    }

    let k3 = save(dir.path(), "k3.json", &ConflictGraph::complete(3));
    let run = |m: &str| {
        let out = csma(&["rates", "--graph", &k3, "--targets", "uniform:0.25", "--method", m]);
        assert!(out.status.success());
        rate_column(&String::from_utf8(out.stdout).unwrap())
    };
    let exact = run("kmax:3");
    assert!(exact.iter().all(|v| (v - 1.0).abs() < 1e-12), "{exact:?}");
    let bethe = run("kmax:2");
    assert!(bethe.iter().all(|v| (v - 1.0).abs() > 1e-3), "{bethe:?}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let k3 = save(dir.path(), "k3.json", &ConflictGraph::complete(3));
    let infeasible = csma(&["oracle", "--graph", &k3, "--targets", "uniform:0.4"]);
    assert_eq!(infeasible.status.code(), Some(2));

    let bad = csma(&["rates", "--graph", &k3, "--targets", "uniform:0.2", "--method", "nonsense"]);
    assert_eq!(bad.status.code(), Some(1));

    let c4 = save(dir.path(), "c4.json", &ConflictGraph::cycle(4));
    let not_chordal = csma(&["rates", "--graph", &c4, "--targets", "uniform:0.2", "--method", "chordal-exact"]);
    assert_eq!(not_chordal.status.code(), Some(1));
    assert!(!not_chordal.stderr.is_empty());
}

#[test]
fn simulate_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let g = save(dir.path(), "p.json", &ConflictGraph::path(3));
    let out_csv = dir.path().join("sim.csv");
    let summary = dir.path().join("sim.json");
    let out = csma(&[
        "simulate", "--graph", &g, "--method", "chordal-exact", "--targets", "list:0.2,0.3,0.2",
        "--horizon", "50000", "--seed", "3", "--replications", "2",
        "--out", path_str(&out_csv), "--summary", path_str(&summary),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(&summary).unwrap()).unwrap();
    assert!(s["mean_relative_error"].as_f64().unwrap() < 0.1);
    assert_eq!(s["achieved"].as_array().unwrap().len(), 3);
    let rows = fs::read_to_string(&out_csv).unwrap();
    assert_eq!(rows.lines().next().unwrap(), "replication,node,achieved");
    assert_eq!(rows.lines().count(), 1 + 2 * 3);
}

#[test]
fn evaluate_exact_forward_on_chordal_graph() {
    let dir = tempfile::tempdir().unwrap();
    let g = save(dir.path(), "p.json", &ConflictGraph::path(5));
    let spec = dir.path().join("spec.json");
    let body = serde_json::json!({
        "graphs": {"files": [g]},
        "targets": ["uniform:0.3"],
        "methods": ["kmax:n", "chordal-exact", "bethe"],
        "evaluation": {"mode": "exact_forward"},
    });
    fs::write(&spec, body.to_string()).unwrap();
    let out_dir = dir.path().join("out");
    let out = csma(&["evaluate", "--spec", path_str(&spec), "--out-dir", path_str(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    for line in text.lines().skip(1) {
        let max_mre: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(max_mre <= 1e-9, "{line}");
    }
    for f in ["results.csv", "summary.csv", "manifest.json"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
}

#[test]
fn oracle_forward_from_rates_file() {
    let dir = tempfile::tempdir().unwrap();
    let g = save(dir.path(), "p.json", &ConflictGraph::path(3));
    let rates = dir.path().join("r.csv");
    let out = csma(&[
        "rates", "--graph", &g, "--targets", "list:0.2,0.3,0.2", "--method", "kmax:n", "--out", path_str(&rates),
    ]);
    assert!(out.status.success());
    let out = csma(&["oracle", "--graph", &g, "--rates", path_str(&rates)]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["z"].as_f64().unwrap() - 2.8).abs() < 1e-12);
    assert_eq!(v["states"].as_u64(), Some(5));

    let feasible = csma(&["oracle", "--graph", &g, "--targets", "list:0.2,0.3,0.2"]);
    let v: serde_json::Value = serde_json::from_slice(&feasible.stdout).unwrap();
    assert_eq!(v["verdict"], "feasible");
}
