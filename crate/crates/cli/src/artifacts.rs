//! Run-directory layout and the records written into it.
//!
//! Every file is written to a temporary sibling and renamed into place, so an
//! interrupted run never leaves a truncated artifact behind.

use std::fs;
use std::path::{Path, PathBuf};

use bernoulli_core::classify::ClassificationRecord;
use bernoulli_core::curve::BoundaryCurve;
use bernoulli_core::flow::{BranchRow, StepDiagnostics};
use bernoulli_core::moments::{harmonic_test_basis, moments, MomentVector};
use bernoulli_core::operator::{SolutionState, Warning};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const CONFIG_ECHO: &str = "config-echo.json";
pub const SUMMARY: &str = "summary.json";
pub const TIMING: &str = "timing.json";
pub const DIAGNOSTICS: &str = "diagnostics.csv";
pub const ORACLE: &str = "oracle.csv";
pub const STATES_DIR: &str = "states";

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, std::io::Error::other(e)))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, std::io::Error::other(e)))
}

/// Serializes `rows` (with a header) and writes them atomically.
pub fn write_csv<T: Serialize>(path: &Path, header: &[String], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(path, std::io::Error::other(e.to_string())))?;
    write_atomic(path, &bytes)
}

pub fn state_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(STATES_DIR).join(format!("{index:04}.json"))
}

/// Creates the run directory and drops snapshot files left by earlier runs.
pub fn prepare_run_dir(dir: &Path) -> Result<()> {
    let states = dir.join(STATES_DIR);
    fs::create_dir_all(&states).map_err(|e| CliError::io(&states, e))?;
    for entry in fs::read_dir(&states).map_err(|e| CliError::io(&states, e))? {
        let path = entry.map_err(|e| CliError::io(&states, e))?.path();
        if is_snapshot(&path) {
            fs::remove_file(&path).map_err(|e| CliError::io(&path, e))?;
        }
    }
    Ok(())
}

fn is_snapshot(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
        && path.file_stem().and_then(|s| s.to_str()).is_some_and(|s| s.len() == 4 && s.bytes().all(|b| b.is_ascii_digit()))
}

/// Snapshot files in index order.
pub fn list_states(dir: &Path) -> Result<Vec<PathBuf>> {
    let states = dir.join(STATES_DIR);
    let mut files: Vec<PathBuf> = fs::read_dir(&states)
        .map_err(|e| CliError::io(&states, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| is_snapshot(p))
        .collect();
    files.sort();
    Ok(files)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub index: usize,
    pub t: f64,
    pub curve: BoundaryCurve,
    pub equivalent_radius: f64,
    pub area: f64,
    pub residual_norm: f64,
    pub converged: bool,
    pub q_mean: f64,
    pub classification: Option<ClassificationRecord>,
    /// Only in the unit-disk setting with the origin enclosed.
    pub moments: Option<MomentVector>,
    pub warnings: Vec<Warning>,
}

impl StateRecord {
    pub fn new(index: usize, state: &SolutionState, k_max: u32) -> Self {
        let c = state.inner();
        StateRecord {
            index,
            t: state.time(),
            curve: c.clone(),
            equivalent_radius: c.equivalent_radius(),
            area: c.area(),
            residual_norm: state.residual_norm(),
            converged: state.is_converged(),
            q_mean: state.q().values.mean(),
            classification: state.classification().cloned(),
            moments: moments(state, &harmonic_test_basis(k_max)).ok(),
            warnings: state.warnings().to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
}

impl From<&CliError> for ErrorRecord {
    fn from(e: &CliError) -> Self {
        ErrorRecord { kind: e.kind().to_string(), message: e.to_string() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminationRecord {
    pub reason: String,
    pub t: f64,
    pub margin: Option<f64>,
    pub steps: usize,
    pub rejected_steps: usize,
    pub max_drift: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub q: f64,
    pub r_lower: Option<f64>,
    pub r_upper: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub label: String,
    pub residual: f64,
}

/// Deterministic run record: contains no timing, so identical configs give
/// byte-identical files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: String,
    pub status: String,
    pub error: Option<ErrorRecord>,
    pub states_written: usize,
    pub terminal: Option<StateRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination: Option<TerminationRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<BranchRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<Vec<OracleRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificates: Option<Vec<Certificate>>,
}

impl Summary {
    pub fn new(mode: &str) -> Self {
        Summary {
            mode: mode.to_string(),
            status: "ok".into(),
            error: None,
            states_written: 0,
            terminal: None,
            newton_iterations: None,
            termination: None,
            rows: None,
            oracle: None,
            certificates: None,
        }
    }

    pub fn fail(&mut self, e: &CliError) {
        self.status = "error".into();
        self.error = Some(e.into());
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

/// One row of diagnostics.csv; step 0 is the initial state.
#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticsRow {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub predicted_residual: f64,
    pub residual: f64,
    pub drift: Option<f64>,
    pub margin: Option<f64>,
    pub kind: Option<String>,
    pub newton_iterations: usize,
    pub equivalent_radius: f64,
    pub moments: Vec<f64>,
}

impl DiagnosticsRow {
    pub fn initial(state: &SolutionState, moments: Option<&MomentVector>, iterations: usize) -> Self {
        let rec = state.classification();
        DiagnosticsRow {
            step: 0,
            t: state.time(),
            dt: 0.0,
            predicted_residual: state.residual_norm(),
            residual: state.residual_norm(),
            drift: moments.map(|_| 0.0),
            margin: rec.map(|r| r.nondegeneracy_margin),
            kind: rec.map(|r| r.kind.to_string()),
            newton_iterations: iterations,
            equivalent_radius: state.inner().equivalent_radius(),
            moments: moments.map(|m| m.values.clone()).unwrap_or_default(),
        }
    }

    pub fn step(step: usize, d: &StepDiagnostics, moments: Option<&MomentVector>) -> Self {
        DiagnosticsRow {
            step,
            t: d.t,
            dt: d.dt,
            predicted_residual: d.predicted_residual,
            residual: d.residual,
            drift: d.drift,
            margin: d.margin,
            kind: d.kind.map(|k| k.to_string()),
            newton_iterations: d.newton_iterations,
            equivalent_radius: d.equivalent_radius,
            moments: moments.map(|m| m.values.clone()).unwrap_or_default(),
        }
    }
}

pub fn diagnostics_header(labels: &[String]) -> Vec<String> {
    let fixed = [
        "step",
        "t",
        "dt",
        "predicted_residual",
        "residual",
        "drift",
        "margin",
        "kind",
        "newton_iterations",
        "equivalent_radius",
    ];
    fixed.iter().map(|s| s.to_string()).chain(labels.iter().cloned()).collect()
}
