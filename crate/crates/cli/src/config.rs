//! Run configuration: JSON schema, defaults and validation.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use bernoulli_core::curve::BoundaryCurve;
use bernoulli_core::flow::{FlowCase, FlowOptions};
use bernoulli_core::operator::NewtonOptions;
use bernoulli_core::schedule::{check_positive, time_derivative_sign, AffineSchedule, QSchedule, TableSchedule};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Solve,
    Classify,
    Branch,
    Flow,
    Oracle,
    Moments,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Classify => "classify",
            Mode::Branch => "branch",
            Mode::Flow => "flow",
            Mode::Oracle => "oracle",
            Mode::Moments => "moments",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleSpec {
    #[serde(default)]
    pub center: [f64; 2],
    pub radius: f64,
}

/// `"unit_disk"`, `{"circle": {...}}` or a full Fourier curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CurveSpec {
    Named(String),
    Circle { circle: CircleSpec },
    Fourier(BoundaryCurve),
}

impl CurveSpec {
    pub fn build(&self) -> Result<BoundaryCurve> {
        match self {
            CurveSpec::Named(name) if name == "unit_disk" || name == "unit_circle" => Ok(BoundaryCurve::unit_circle()),
            CurveSpec::Named(name) => Err(CliError::ConfigInvalid(format!("unknown curve name {name:?}"))),
            CurveSpec::Circle { circle } => BoundaryCurve::circle(circle.center, circle.radius).map_err(invalid),
            CurveSpec::Fourier(c) => Ok(c.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Constant {
        q: f64,
    },
    Affine {
        q0: f64,
        #[serde(default)]
        q1: f64,
        #[serde(default)]
        tilt: [f64; 2],
    },
    Table(TableSchedule),
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<Arc<dyn QSchedule>> {
        Ok(match self {
            ScheduleSpec::Constant { q } => Arc::new(AffineSchedule::constant(*q)),
            ScheduleSpec::Affine { q0, q1, tilt } => Arc::new(AffineSchedule::tilted(*q0, *q1, *tilt)),
            ScheduleSpec::Table(t) => {
                t.validate().map_err(invalid)?;
                Arc::new(t.clone())
            }
        })
    }

    /// The same spatial profile at overall level `q` and frozen in time;
    /// used for the rows of a branch sweep.
    pub fn at_level(&self, q: f64) -> Arc<dyn QSchedule> {
        match self {
            ScheduleSpec::Constant { .. } => Arc::new(AffineSchedule::constant(q)),
            ScheduleSpec::Affine { tilt, .. } => Arc::new(AffineSchedule::tilted(q, 0.0, *tilt)),
            ScheduleSpec::Table(t) => Arc::new(TableSchedule { q0: q, q1: 0.0, ..t.clone() }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub n_outer: usize,
    pub n_inner: usize,
    /// Raise the initial curve to this Fourier degree before solving.
    pub degree: Option<usize>,
    pub newton_tol: f64,
    pub max_iter: usize,
    pub dt0: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub adaptive: bool,
    pub reproject: bool,
    pub k_max: u32,
    pub tau_par: Option<f64>,
}

impl Default for Numerics {
    fn default() -> Self {
        let flow = FlowOptions::default();
        Numerics {
            n_outer: 128,
            n_inner: 128,
            degree: None,
            newton_tol: flow.newton.tol,
            max_iter: flow.newton.max_iter,
            dt0: flow.dt0,
            dt_min: flow.dt_min,
            dt_max: flow.dt_max,
            adaptive: flow.adaptive,
            reproject: flow.reproject,
            k_max: flow.k_max,
            tau_par: None,
        }
    }
}

impl Numerics {
    pub fn newton(&self) -> NewtonOptions {
        NewtonOptions { tol: self.newton_tol, max_iter: self.max_iter, ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseSpec {
    A,
    B,
    #[serde(rename = "unchecked")]
    Unchecked,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub horizon: f64,
    pub case: CaseSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    pub q_values: Vec<f64>,
    pub seeds: Vec<CurveSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    #[serde(default = "two")]
    pub n: u32,
    pub q_values: Vec<f64>,
}

fn two() -> u32 {
    2
}

fn unit_disk() -> CurveSpec {
    CurveSpec::Named("unit_disk".into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default = "unit_disk")]
    pub container: CurveSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<CurveSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSpec>,
    /// Time label for single-state modes.
    #[serde(default)]
    pub time: f64,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<BranchSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

pub(crate) fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::ConfigInvalid(e.to_string())
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))
}

/// Everything a mode needs, built and checked before any solve.
pub struct Prepared {
    pub container: BoundaryCurve,
    pub initial: Option<BoundaryCurve>,
    pub schedule: Option<Arc<dyn QSchedule>>,
    pub flow: Option<(f64, FlowOptions)>,
}

fn require<'a, T>(field: &'a Option<T>, name: &str, mode: Mode) -> Result<&'a T> {
    field.as_ref().ok_or_else(|| CliError::ConfigInvalid(format!("mode {} requires `{name}`", mode.as_str())))
}

impl RunConfig {
    /// Checks mode-required fields, builds curves and schedules, and probes
    /// the schedule for positivity (and the declared time-derivative sign).
    pub fn prepare(&self, mode: Mode) -> Result<Prepared> {
        if let Some(m) = self.mode {
            if m != mode {
                return Err(CliError::ConfigInvalid(format!("config declares mode {} but {} was requested", m.as_str(), mode.as_str())));
            }
        }
        let n = &self.numerics;
        if n.n_outer < 8 || n.n_inner < 8 || n.n_outer % 2 == 1 || n.n_inner % 2 == 1 {
            return Err(CliError::ConfigInvalid("node counts must be even and at least 8".into()));
        }
        if !(n.newton_tol > 0.0) || n.max_iter == 0 {
            return Err(CliError::ConfigInvalid("newton_tol must be positive and max_iter nonzero".into()));
        }
        let container = self.container.build()?;
        let mut prepared = Prepared { container, initial: None, schedule: None, flow: None };
        if mode == Mode::Oracle {
            let o = require(&self.oracle, "oracle", mode)?;
            if o.q_values.iter().any(|q| !(*q > 0.0)) {
                return Err(CliError::ConfigInvalid("oracle Q values must be positive".into()));
            }
            return Ok(prepared);
        }

        let spec = require(&self.schedule, "schedule", mode)?;
        let schedule = spec.build()?;
        let extent = (0..64)
            .map(|i| prepared.container.radius(2.0 * std::f64::consts::PI * i as f64 / 64.0))
            .fold(0.0, f64::max);
        let center = prepared.container.center();

        if mode == Mode::Branch {
            let b = require(&self.branch, "branch", mode)?;
            if b.q_values.is_empty() || b.seeds.is_empty() {
                return Err(CliError::ConfigInvalid("branch needs at least one Q value and one seed".into()));
            }
            for &q in &b.q_values {
                if !(q > 0.0) {
                    return Err(CliError::ConfigInvalid(format!("branch Q value {q} must be positive")));
                }
                check_positive(spec.at_level(q).as_ref(), center, extent, &[0.0]).map_err(invalid)?;
            }
            for seed in &b.seeds {
                seed.build()?;
            }
            prepared.schedule = Some(schedule);
            return Ok(prepared);
        }

        let mut initial = require(&self.initial, "initial", mode)?.build()?;
        if let Some(k) = n.degree {
            initial = initial.with_degree(k).map_err(invalid)?;
        }
        let mut times = vec![self.time];
        if mode == Mode::Flow {
            let f = require(&self.flow, "flow", mode)?;
            if !(f.horizon > self.time) {
                return Err(CliError::ConfigInvalid(format!("flow horizon {} must exceed the start time {}", f.horizon, self.time)));
            }
            times.push(0.5 * (self.time + f.horizon));
            times.push(f.horizon);
            let sign = time_derivative_sign(schedule.as_ref(), center, extent, &times);
            let case = match f.case {
                CaseSpec::A => {
                    if sign != Some(1) {
                        return Err(CliError::ConfigInvalid("case A requires ∂Q/∂t > 0 throughout the container".into()));
                    }
                    FlowCase::A
                }
                CaseSpec::B => {
                    if sign != Some(-1) {
                        return Err(CliError::ConfigInvalid("case B requires ∂Q/∂t < 0 throughout the container".into()));
                    }
                    FlowCase::B
                }
                CaseSpec::Unchecked => FlowCase::Unchecked,
            };
            if !(n.dt0 > 0.0 && n.dt_min > 0.0 && n.dt_min <= n.dt_max) {
                return Err(CliError::ConfigInvalid("time-step bounds must satisfy 0 < dt_min <= dt_max and dt0 > 0".into()));
            }
            let opts = FlowOptions {
                dt0: n.dt0,
                dt_min: n.dt_min,
                dt_max: n.dt_max,
                newton: n.newton(),
                case,
                reproject: n.reproject,
                adaptive: n.adaptive,
                k_max: n.k_max,
                ..Default::default()
            };
            prepared.flow = Some((f.horizon, opts));
        }
        check_positive(schedule.as_ref(), center, extent, &times).map_err(invalid)?;
        prepared.initial = Some(initial);
        prepared.schedule = Some(schedule);
        Ok(prepared)
    }
}
