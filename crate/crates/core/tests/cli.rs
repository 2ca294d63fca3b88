use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

use lipjet::inverse::InverseProblem;
use lipjet::jet::{grid_1d, LipGrade, LipJet};
use lipjet::smooth::ExprMap;

fn lipjet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lipjet")).args(args).output().expect("binary runs")
}

fn jet_file(dir: &Path, name: &str, expr: &str, points: Vec<Vec<f64>>, gamma: f64) -> String {
    let f = ExprMap::parse(1, &[expr]).unwrap();
    let jet = LipJet::from_map(&f, points, LipGrade::new(gamma).unwrap()).unwrap();
    let path = dir.join(name);
    jet.write(&path).unwrap();
    path.to_string_lossy().into_owned()
}

fn write_json(dir: &Path, name: &str, v: &Value) -> String {
    let path: PathBuf = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not a report ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

#[test]
fn certify_cubic_jet() {
    let dir = TempDir::new().unwrap();
    let jet = jet_file(dir.path(), "t3.json", "x0^3", grid_1d(-1.0, 1.0, 101), 2.0);
    let out = lipjet(&["certify", "--jet", &jet]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["command"], "certify");
    assert_eq!(r["status"], "ok");
    assert_eq!(r["seed"], 0);
    let m = r["result"]["certificate"]["m"].as_f64().unwrap();
    // |3x² − 3y²| / |x − y| = 3|x + y|, largest for the two right-most grid points
    assert!((m - 3.0 * 1.98).abs() < 1e-12, "{m}");
}

#[test]
fn exceeded_bound_is_a_certification_failure() {
    let dir = TempDir::new().unwrap();
    let jet = jet_file(dir.path(), "t3.json", "x0^3", grid_1d(-1.0, 1.0, 21), 2.0);
    let out = lipjet(&["certify", "--jet", &jet, "--bound", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["status"], "certification-failure");
}

#[test]
fn misaligned_compose_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let inner = jet_file(dir.path(), "f.json", "x0 + 0.1", grid_1d(0.0, 1.0, 5), 2.0);
    let outer = jet_file(dir.path(), "g.json", "x0^2", grid_1d(0.0, 1.0, 5), 2.0);
    let out = lipjet(&["compose", "--outer", &outer, "--inner", &inner]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("[0.1] of inner point 0"), "{err}");
    assert_eq!(report(&out)["status"], "input-error");
}

#[test]
fn aligned_compose_and_embed() {
    let dir = TempDir::new().unwrap();
    let xs = grid_1d(0.0, 1.0, 6);
    let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[0] + 0.5]).collect();
    let inner = jet_file(dir.path(), "f.json", "x0 + 0.5", xs, 2.5);
    let outer = jet_file(dir.path(), "g.json", "x0^3", ys, 2.5);
    let out_jet = dir.path().join("gf.json");
    let out = lipjet(&["compose", "--outer", &outer, "--inner", &inner, "--out-jet", out_jet.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(LipJet::read(&out_jet).unwrap().len(), 6);
    let out = lipjet(&["embed", "--jet", out_jet.to_str().unwrap(), "--gamma-prime", "1.5"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["result"]["holds"], true);
}

#[test]
fn product_and_estimate() {
    let dir = TempDir::new().unwrap();
    let pts = grid_1d(-1.0, 1.0, 41);
    let f = jet_file(dir.path(), "f.json", "x0^3", pts.clone(), 2.0);
    let g = jet_file(dir.path(), "g.json", "sin(x0)", pts, 2.0);
    for kind in ["cartesian", "bilinear"] {
        let out = lipjet(&["product", "--left", &f, "--right", &g, "--kind", kind]);
        assert_eq!(out.status.code(), Some(0), "{kind}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = lipjet(&["estimate", "--jet", &f, "--x0", "0", "--gamma-prime", "1", "--delta", "0.5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(&out)["result"]["holds"], true);
}

#[test]
fn invert_and_rank() {
    let dir = TempDir::new().unwrap();
    let phi = ExprMap::parse(1, &["x0 + 0.1*sin(x0)"]).unwrap();
    let prob = InverseProblem::calibrate(phi, vec![0.0], 2.0, 0.5, 41).unwrap();
    let problem = write_json(dir.path(), "p.json", &serde_json::to_value(prob.to_file()).unwrap());
    let out = lipjet(&["invert", "--problem", &problem, "--targets", "0.1;-0.2", "--ball-samples", "20", "--jet"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(&out)["result"]["solutions"].as_array().unwrap().len(), 2);

    let outside = lipjet(&["invert", "--problem", &problem, "--targets", "5"]);
    assert_ne!(outside.status.code(), Some(0));

    let map = write_json(
        dir.path(),
        "m.json",
        &json!({ "phi": ["x0", "x0^2"], "x0": [0.3], "rows": [0], "cols": [0], "gamma": 2.0 }),
    );
    let out = lipjet(&["rank", "--map", &map]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(&out)["result"]["rank"], 1);
}

#[test]
fn flow_space_lipschitz_with_csv() {
    let dir = TempDir::new().unwrap();
    let field = write_json(dir.path(), "a.json", &json!({ "dim": 1, "coords": ["sin(x0)"], "box": [[-4.0, 4.0]], "gamma": 2.0 }));
    let csv = dir.path().join("traj.csv");
    let out = lipjet(&[
        "flow", "--field", &field, "--T", "1", "--check", "space-lipschitz", "--x0", "1", "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(report(&out)["result"]["space_lipschitz"]["passed"].as_bool().unwrap());
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("t,y0\n"));
}

#[test]
fn same_seed_gives_identical_reports() {
    let dir = TempDir::new().unwrap();
    let field = write_json(dir.path(), "a.json", &json!({ "dim": 1, "coords": ["sin(x0)"], "box": [[-4.0, 4.0]], "gamma": 2.0 }));
    let paths: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("r{i}.json"))).collect();
    for p in &paths {
        let out = lipjet(&[
            "flow", "--field", &field, "--T", "0.5", "--check", "time-space", "--pairs", "8", "--seed", "7",
            "--report", p.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("flow:"));
    }
    let (a, b) = (std::fs::read(&paths[0]).unwrap(), std::fs::read(&paths[1]).unwrap());
    assert_eq!(a, b);
    let r: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(r["seed"], 7);
}

#[test]
fn check_norms_and_bad_input() {
    let out = lipjet(&["check-norms", "--norm", "l1", "--dim", "2", "--k-max", "3", "--samples", "50"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["status"], "ok");
    let out = lipjet(&["check-norms", "--norm", "l7x"]);
    assert_eq!(out.status.code(), Some(1));
    let out = lipjet(&["certify", "--jet", "/nonexistent/jet.json"]);
    assert_eq!(out.status.code(), Some(1));
}
