use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use bernoulli_cli::artifacts::{StateRecord, Summary};
use bernoulli_core::radial::{radial_branch_roots, radial_q};
use serde_json::{json, Value};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_bernoulli");

fn run(mode: &str, config: &Value, dir: &TempDir, out: &str) -> (i32, PathBuf) {
    let cfg = dir.path().join(format!("{out}.json"));
    fs::write(&cfg, serde_json::to_string(config).unwrap()).unwrap();
    let out = dir.path().join(out);
    let status = Command::new(BIN).args([mode, "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    (status.code().unwrap(), out)
}

fn plot(run_dir: &Path) -> i32 {
    Command::new(BIN).arg("plot").arg(run_dir).status().unwrap().code().unwrap()
}

fn summary(dir: &Path) -> Summary {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

#[test]
fn oracle_table_matches_the_radial_roots() {
    let tmp = TempDir::new().unwrap();
    let (code, out) = run("oracle", &json!({"oracle": {"n": 2, "q_values": [2.8, 3.0, 3.5]}}), &tmp, "oracle");
    assert_eq!(code, 0);
    let rows = csv_rows(&out.join("oracle.csv"));
    assert_eq!(rows.len(), 3);
    for row in rows {
        let q: f64 = row[0].parse().unwrap();
        let (lo, hi) = radial_branch_roots(q, 2).unwrap().unwrap();
        assert_eq!(row[1].parse::<f64>().unwrap(), lo.r);
        assert_eq!(row[2].parse::<f64>().unwrap(), hi.r);
    }
}

#[test]
fn solve_recovers_the_radial_solution() {
    let tmp = TempDir::new().unwrap();
    let q = radial_q(0.5, 2).unwrap();
    assert!((q - 2.885390).abs() < 1e-6);
    let cfg = json!({
        "mode": "solve",
        "container": "unit_disk",
        "initial": {"circle": {"radius": 0.48}},
        "schedule": {"type": "constant", "q": q},
    });
    let (code, out) = run("solve", &cfg, &tmp, "solve");
    assert_eq!(code, 0);
    let s = summary(&out);
    assert_eq!(s.status, "ok");
    let terminal = s.terminal.unwrap();
    assert!((terminal.equivalent_radius - 0.5).abs() < 1e-8, "{}", terminal.equivalent_radius);
    assert!(terminal.converged);
    for name in ["config-echo.json", "states/0000.json", "diagnostics.csv", "timing.json"] {
        assert!(out.join(name).exists(), "{name}");
    }
}

#[test]
fn case_a_with_decreasing_q_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({
        "initial": {"circle": {"radius": 0.22}},
        "schedule": {"type": "affine", "q0": 3.0, "q1": -1.0},
        "flow": {"horizon": 0.1, "case": "A"},
    });
    let (code, out) = run("flow", &cfg, &tmp, "flow");
    assert_eq!(code, 2);
    let s = summary(&out);
    assert_eq!(s.status, "error");
    assert_eq!(s.error.unwrap().kind, "ConfigInvalid");
    assert_eq!(s.states_written, 0);
    assert_eq!(fs::read_dir(out.join("states")).unwrap().count(), 0);
}

#[test]
fn other_config_errors() {
    let tmp = TempDir::new().unwrap();
    let (code, _) = run("solve", &json!({"mode": "oracle", "oracle": {"q_values": [3.0]}}), &tmp, "mismatch");
    assert_eq!(code, 2);
    let (code, _) = run("flow", &json!({"initial": {"circle": {"radius": 0.3}}, "schedule": {"type": "constant", "q": 3.0}}), &tmp, "noflow");
    assert_eq!(code, 2);
    let (code, _) = run("solve", &json!({"initial": {"circle": {"radius": 0.3}}, "schedule": {"type": "constant", "q": -1.0}}), &tmp, "negq");
    assert_eq!(code, 2);

    // no run directory anywhere
    let cfg = tmp.path().join("noout.json");
    fs::write(&cfg, r#"{"oracle": {"q_values": [3.0]}}"#).unwrap();
    let status = Command::new(BIN).args(["oracle", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let status = Command::new(BIN).args(["oracle", "--config"]).arg(tmp.path().join("missing.json")).status().unwrap();
    assert_eq!(status.code(), Some(4));
}

#[test]
fn solver_failure_leaves_a_complete_summary() {
    let tmp = TempDir::new().unwrap();
    // below the fold there is no solution at all
    let cfg = json!({"initial": {"circle": {"radius": 0.4}}, "schedule": {"type": "constant", "q": 2.0}});
    let (code, out) = run("solve", &cfg, &tmp, "fail");
    assert_eq!(code, 3);
    let s = summary(&out);
    assert_eq!(s.status, "error");
    let kind = s.error.unwrap().kind;
    assert!(["NoConvergence", "NonStarShaped", "BoundaryTooClose"].contains(&kind.as_str()), "{kind}");
    assert!(out.join("timing.json").exists());
    assert_eq!(plot(&out), 4);
}

#[test]
fn summaries_are_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({
        "initial": {"center": [0.02, -0.01], "a0": 0.5, "cos": [0.01, 0.005], "sin": [0.0, -0.004]},
        "schedule": {"type": "affine", "q0": 3.0, "tilt": [0.05, 0.02]},
        "numerics": {"n_outer": 96, "n_inner": 96, "degree": 12},
    });
    let (c1, a) = run("classify", &cfg, &tmp, "a");
    let (c2, b) = run("classify", &cfg, &tmp, "b");
    assert_eq!((c1, c2), (0, 0));
    let sa = fs::read(a.join("summary.json")).unwrap();
    assert_eq!(sa, fs::read(b.join("summary.json")).unwrap());
    assert_eq!(fs::read(a.join("states/0000.json")).unwrap(), fs::read(b.join("states/0000.json")).unwrap());
    let s = summary(&a);
    assert!(s.terminal.unwrap().classification.is_some());
}

#[test]
fn radial_flow_artifacts() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({
        "initial": {"circle": {"radius": 0.22}},
        "schedule": {"type": "affine", "q0": 3.0, "q1": 1.0},
        "flow": {"horizon": 0.1, "case": "A"},
        "numerics": {"dt0": 0.002, "dt_max": 0.002, "adaptive": false},
    });
    let (code, out) = run("flow", &cfg, &tmp, "flow");
    assert_eq!(code, 0);
    let s = summary(&out);
    let term = s.termination.unwrap();
    assert_eq!((term.reason.as_str(), term.steps), ("completed", 50));
    assert_eq!(s.states_written, 51);

    let last: StateRecord = serde_json::from_str(&fs::read_to_string(out.join("states/0050.json")).unwrap()).unwrap();
    let target = radial_branch_roots(3.1, 2).unwrap().unwrap().0.r;
    assert!((last.equivalent_radius - target).abs() < 1e-8);
    assert_eq!(csv_rows(&out.join("diagnostics.csv")).len(), 51);

    assert_eq!(plot(&out), 0);
    let points = csv_rows(&out.join("curves.csv"));
    let mut blocks: Vec<Vec<f64>> = Vec::new();
    for p in &points {
        let snap: usize = p[0].parse().unwrap();
        if snap == blocks.len() {
            blocks.push(Vec::new());
        }
        let (x, y): (f64, f64) = (p[3].parse().unwrap(), p[4].parse().unwrap());
        blocks[snap].push(x.hypot(y));
    }
    assert_eq!(blocks.len(), 51);
    for radii in &blocks {
        let mean = radii.iter().sum::<f64>() / radii.len() as f64;
        let dev = radii.iter().map(|r| (r - mean).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-7, "{dev}");
    }
    let drift = csv_rows(&out.join("drift.csv"));
    assert_eq!(drift.len(), 51);
    assert!(drift.iter().all(|r| r[1].parse::<f64>().unwrap() < 1e-4));

    // a damaged run directory is reported, not silently plotted
    fs::remove_file(out.join("states/0007.json")).unwrap();
    assert_eq!(plot(&out), 4);
}

#[test]
fn branch_kinds() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({
        "schedule": {"type": "constant", "q": 3.0},
        "branch": {
            "q_values": [2.0, 3.0, 2.885390081777927],
            "seeds": [{"circle": {"radius": 0.15}}, {"circle": {"radius": 0.6}}],
        },
    });
    let (code, out) = run("branch", &cfg, &tmp, "branch");
    assert_eq!(code, 0);
    assert_eq!(plot(&out), 0);
    let rows = csv_rows(&out.join("branch.csv"));
    assert_eq!(rows.len(), 6);
    let kinds: Vec<&str> = rows.iter().map(|r| r.get(2).unwrap()).collect();
    assert!(kinds.iter().all(|k| ["Elliptic", "Hyperbolic", "Parabolic", "NoConvergence"].contains(k)));
    assert_eq!(kinds, ["NoConvergence", "NoConvergence", "Hyperbolic", "Elliptic", "Hyperbolic", "Elliptic"]);
    let r: f64 = rows[5][1].parse().unwrap();
    assert!((r - 0.5).abs() < 1e-8);
}

#[test]
fn plot_needs_a_run_directory() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(plot(tmp.path()), 4);
}
