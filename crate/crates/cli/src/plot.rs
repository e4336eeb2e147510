//! Flattens a finished run directory into plot-ready CSV tables.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use bernoulli_core::flow::RowStatus;
use serde::{Deserialize, Serialize};

use crate::artifacts::{list_states, read_json, write_csv, StateRecord, Summary, DIAGNOSTICS, STATES_DIR, SUMMARY};
use crate::error::{CliError, Result};

pub const CURVES: &str = "curves.csv";
pub const BRANCH: &str = "branch.csv";
pub const DRIFT: &str = "drift.csv";

/// Samples per snapshot curve in curves.csv.
pub const CURVE_SAMPLES: usize = 256;

#[derive(Serialize)]
struct CurvePoint {
    snapshot: usize,
    t: f64,
    theta: f64,
    x: f64,
    y: f64,
}

#[derive(Serialize)]
struct BranchPoint {
    q: f64,
    equivalent_radius: Option<f64>,
    kind: String,
}

#[derive(Serialize, Deserialize)]
struct DriftPoint {
    t: f64,
    drift: Option<f64>,
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

fn require(dir: &Path, name: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::MissingArtifacts(name.to_string()))
    }
}

/// Writes curves.csv, branch.csv and/or drift.csv into `out`, depending on
/// what the run produced, and returns the paths written.
pub fn emit_plot_data(run: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let summary: Summary = read_json(&require(run, SUMMARY)?)?;
    if summary.status != "ok" && summary.states_written == 0 && summary.rows.is_none() {
        return Err(CliError::MissingArtifacts(format!("{SUMMARY} records a failed run with no states")));
    }
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut written = Vec::new();

    if summary.states_written > 0 {
        require(run, STATES_DIR)?;
        let files = list_states(run)?;
        if files.len() != summary.states_written {
            return Err(CliError::MissingArtifacts(format!(
                "{STATES_DIR}/ holds {} snapshots, summary expects {}",
                files.len(),
                summary.states_written
            )));
        }
        let mut points = Vec::with_capacity(files.len() * CURVE_SAMPLES);
        for f in &files {
            let rec: StateRecord = read_json(f)?;
            for i in 0..CURVE_SAMPLES {
                let theta = 2.0 * PI * i as f64 / CURVE_SAMPLES as f64;
                let [x, y] = rec.curve.point(theta);
                points.push(CurvePoint { snapshot: rec.index, t: rec.t, theta, x, y });
            }
        }
        let path = out.join(CURVES);
        write_csv(&path, &header(&["snapshot", "t", "theta", "x", "y"]), &points)?;
        written.push(path);
    }

    if let Some(rows) = &summary.rows {
        let points: Vec<BranchPoint> = rows
            .iter()
            .map(|r| BranchPoint {
                q: r.q,
                equivalent_radius: r.equivalent_radius,
                kind: match (&r.status, r.kind) {
                    (RowStatus::Converged, Some(k)) => k.to_string(),
                    (RowStatus::Failed(kind), _) => kind.clone(),
                    _ => "NoConvergence".into(),
                },
            })
            .collect();
        let path = out.join(BRANCH);
        write_csv(&path, &header(&["q", "equivalent_radius", "kind"]), &points)?;
        written.push(path);
    } else if let Some(rows) = &summary.oracle {
        // the small-radius root is the hyperbolic branch, the large one elliptic
        let mut points = Vec::new();
        for r in rows {
            for (radius, kind) in [(r.r_lower, "Hyperbolic"), (r.r_upper, "Elliptic")] {
                if let Some(radius) = radius {
                    points.push(BranchPoint { q: r.q, equivalent_radius: Some(radius), kind: kind.into() });
                }
            }
        }
        let path = out.join(BRANCH);
        write_csv(&path, &header(&["q", "equivalent_radius", "kind"]), &points)?;
        written.push(path);
    }

    if summary.termination.is_some() {
        let mut reader = csv::Reader::from_path(require(run, DIAGNOSTICS)?)?;
        let cols = reader.headers()?.clone();
        let idx = |name: &str| {
            cols.iter().position(|c| c == name).ok_or_else(|| CliError::MissingArtifacts(format!("{DIAGNOSTICS} column {name}")))
        };
        let (ti, di) = (idx("t")?, idx("drift")?);
        let mut points = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let parse = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok());
            let t = parse(ti).ok_or_else(|| CliError::MissingArtifacts(format!("{DIAGNOSTICS} has a row without t")))?;
            points.push(DriftPoint { t, drift: parse(di) });
        }
        let path = out.join(DRIFT);
        write_csv(&path, &header(&["t", "drift"]), &points)?;
        written.push(path);
    }
    Ok(written)
}
