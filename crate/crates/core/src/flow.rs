//! Foliation flow: the nonlocal evolution `V = -p/Q`, with `p` the Robin
//! solution for data `∂Q/∂t`, integrated by a semi-implicit step in the
//! radius coefficients followed by Newton re-projection at the new time.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{classify, Kind};
use crate::curve::{sample_geometry, BoundaryCurve, BoundaryField};
use crate::error::{Error, Result};
use crate::moments::{harmonic_test_basis, moments, moments_on, HarmonicTestFunction, MomentVector};
use crate::operator::{eval_f, newton_correct, state_for, NewtonOptions, SolutionState, NEAR_DEGENERATE_MARGIN};
use crate::schedule::QSchedule;
use crate::spectral;

/// Fourier multiplier `(k² + 1)/(|k| + μ)` scaled by `max(0, -m₁m₂)`: the
/// principal symbol of the flow generator, used as implicit stabilization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolPreconditioner {
    pub mu: f64,
    pub m1: f64,
    pub m2: f64,
    /// `multiplier(k)` for `k = 0..=k_max`.
    pub table: Vec<f64>,
}

impl SymbolPreconditioner {
    pub fn new(mu: f64, m1: f64, m2: f64, k_max: usize) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::MuTooSmall { mu, min_shifted: mu });
        }
        let table = (0..=k_max).map(|k| symbol(k as f64, mu)).collect();
        Ok(SymbolPreconditioner { mu, m1, m2, table })
    }

    pub fn multiplier(&self, k: i64) -> f64 {
        let k = k.unsigned_abs() as usize;
        self.table.get(k).copied().unwrap_or_else(|| symbol(k as f64, self.mu))
    }

    /// Scalar in front of the symbol; zero when the flow is not dissipative.
    pub fn strength(&self) -> f64 {
        (-self.m1 * self.m2).max(0.0)
    }
}

fn symbol(k: f64, mu: f64) -> f64 {
    (k * k + 1.0) / (k + mu)
}

/// Default shift `max(0, -min β) + 1` for the Robin coefficient `β`.
pub fn default_mu(beta: &BoundaryField) -> f64 {
    (-beta.min()).max(0.0) + 1.0
}

/// Velocity of the flow at a state: the Robin solution `p` for data
/// `∂Q/∂t` and the radial rate `Ṙ = p/(Q g)`.
fn flow_velocity(state: &SolutionState) -> Result<(BoundaryField, BoundaryField)> {
    let s = state.domain().inner_samples();
    let t = state.time();
    let phi: Vec<f64> = s.points.iter().map(|x| state.schedule().time_derivative(*x, t)).collect();
    let p = state.robin_system()?.solve(&phi)?;
    let q = &state.q().values;
    let rdot = (0..s.len()).map(|i| p[i] / (q[i] * s.metric[i])).collect::<Vec<_>>();
    Ok((p, rdot.into()))
}

fn preconditioner_from(state: &SolutionState, p: &BoundaryField, mu: Option<f64>, k_max: usize) -> Result<SymbolPreconditioner> {
    let beta = state.robin_coefficient();
    let mu = mu.unwrap_or_else(|| default_mu(&beta));
    let min_shifted = beta.min() + mu;
    if !(min_shifted > 0.0) {
        return Err(Error::MuTooSmall { mu, min_shifted });
    }
    let s = state.domain().inner_samples();
    let q = &state.q().values;
    let m1 = (0..s.len()).map(|i| 1.0 / (s.metric[i] * q[i])).sum::<f64>() / s.len() as f64;
    SymbolPreconditioner::new(mu, m1, p.mean(), k_max)
}

/// Preconditioner for the flow at `state` (driven by its own schedule).
/// `mu = None` selects [`default_mu`].
pub fn symbol_preconditioner(state: &SolutionState, mu: Option<f64>) -> Result<SymbolPreconditioner> {
    let (p, _) = flow_velocity(state)?;
    preconditioner_from(state, &p, mu, state.inner().degree())
}

/// Which hypothesis of the existence theorem a run claims.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowCase {
    /// Hyperbolic monotone start, `∂Q/∂t > 0`.
    A,
    /// Elliptic monotone start, `∂Q/∂t < 0`.
    B,
    Unchecked,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub dt0: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub newton: NewtonOptions,
    pub case: FlowCase,
    /// Newton-correct every predicted curve at the new time.
    pub reproject: bool,
    /// Halve `dt` on failure or excessive drift, grow it after clean steps.
    pub adaptive: bool,
    /// Degree of the moment basis used for drift monitoring.
    pub k_max: u32,
    pub drift_tol: f64,
    /// Runs stop once the normalized Robin margin drops below this.
    pub parabolic_margin: f64,
    /// Robin shift for the stabilization; `None` uses the default.
    pub mu: Option<f64>,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            dt0: 0.01,
            dt_min: 1e-5,
            dt_max: 0.05,
            newton: NewtonOptions::default(),
            case: FlowCase::Unchecked,
            reproject: true,
            adaptive: true,
            k_max: 8,
            drift_tol: 1e-5,
            parabolic_margin: NEAR_DEGENERATE_MARGIN,
            mu: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: SolutionState,
    pub dt: f64,
    /// Residual of the predicted curve at the new time, before correction.
    pub predicted_residual: f64,
    /// Moments of the predicted curve; `None` outside the unit-disk setting.
    pub predicted_moments: Option<MomentVector>,
    pub newton_iterations: usize,
}

/// One semi-implicit step of length `dt`, then (optionally) re-projection.
pub fn flow_step(state: &SolutionState, dt: f64, opts: &FlowOptions) -> Result<StepOutcome> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt = {dt} must be positive")));
    }
    let (p, rdot) = flow_velocity(state)?;
    if opts.case != FlowCase::Unchecked {
        let max_p = p.max();
        if max_p >= 0.0 {
            return Err(Error::SignMismatch { max_p });
        }
    }
    let curve = state.inner();
    let k = curve.degree();
    let pre = preconditioner_from(state, &p, opts.mu, k)?;
    let sigma = pre.strength();
    let (v0, vc, vs) = spectral::real_modes(&rdot, k);
    let damp = |k: i64| 1.0 / (1.0 + dt * sigma * pre.multiplier(k));
    let d0 = dt * v0 * damp(0);
    let dc: Vec<f64> = vc.iter().enumerate().map(|(j, v)| dt * v * damp(j as i64 + 1)).collect();
    let ds: Vec<f64> = vs.iter().enumerate().map(|(j, v)| dt * v * damp(j as i64 + 1)).collect();
    let predicted = curve.perturbed(d0, &dc, &ds)?;

    let t_new = state.time() + dt;
    let n = state.domain().inner_samples().len();
    let predicted_moments = if unit_disk_setting(state) {
        let samples = sample_geometry(&predicted, n)?;
        let q: Vec<f64> = samples.points.iter().map(|x| state.schedule().value(*x, t_new)).collect();
        Some(moments_on(&samples, &q, t_new, &harmonic_test_basis(opts.k_max))?)
    } else {
        None
    };

    let domain = state.domain().with_inner(predicted)?;
    let trial = eval_f(&domain, state.schedule().clone(), t_new)?;
    let predicted_residual = trial.residual_norm();
    let (next, iterations) = if opts.reproject {
        let out = newton_correct(&trial, &opts.newton)?;
        (out.state, out.iterations)
    } else {
        (trial, 0)
    };
    Ok(StepOutcome { state: next, dt, predicted_residual, predicted_moments, newton_iterations: iterations })
}

fn unit_disk_setting(state: &SolutionState) -> bool {
    state.domain().outer().is_unit_circle(1e-12) && state.inner().contains([0.0, 0.0])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub t: f64,
    pub dt: f64,
    pub predicted_residual: f64,
    pub residual: f64,
    /// `max |m(t) - m(0)|` over the basis, measured on the predicted curve.
    pub drift: Option<f64>,
    pub drift_vector: Option<Vec<f64>>,
    pub kind: Option<Kind>,
    pub margin: Option<f64>,
    pub newton_iterations: usize,
    pub equivalent_radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Termination {
    Completed,
    ParabolicApproach { t: f64, margin: f64 },
    Failed(Error),
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::ParabolicApproach { .. } => "parabolic_approach",
            Termination::Failed(_) => "failed",
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowTrajectory {
    pub states: Vec<SolutionState>,
    /// One entry per accepted step (`states.len() - 1` entries).
    pub diagnostics: Vec<StepDiagnostics>,
    pub reference_moments: Option<MomentVector>,
    pub rejected_steps: usize,
    pub termination: Termination,
}

impl FlowTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(SolutionState::time).collect()
    }

    pub fn last(&self) -> &SolutionState {
        self.states.last().expect("trajectory holds its initial state")
    }

    pub fn max_drift(&self) -> f64 {
        self.diagnostics.iter().filter_map(|d| d.drift).fold(0.0, f64::max)
    }
}

/// Integrates the flow from the converged `state0` up to time `horizon`.
///
/// Errors before the first step (unconverged start, bad horizon) are returned
/// directly; failures during the run end the trajectory with
/// [`Termination::Failed`] and keep every accepted state.
pub fn run_flow(state0: &SolutionState, horizon: f64, opts: &FlowOptions) -> Result<FlowTrajectory> {
    if !state0.is_converged() {
        return Err(Error::InvalidInput(format!(
            "flow needs a converged initial state (residual {:.3e})",
            state0.residual_norm()
        )));
    }
    if !(horizon > state0.time()) {
        return Err(Error::InvalidInput(format!("horizon {horizon} is not after t0 = {}", state0.time())));
    }
    if !(opts.dt0 > 0.0 && opts.dt_min > 0.0 && opts.dt_min <= opts.dt_max) {
        return Err(Error::InvalidInput("inconsistent time-step bounds".into()));
    }
    let basis: Vec<HarmonicTestFunction> = harmonic_test_basis(opts.k_max);
    let reference = if unit_disk_setting(state0) { Some(moments(state0, &basis)?) } else { None };

    let mut first = state0.clone();
    if first.classification().is_none() {
        first.set_classification(classify(&first, None)?);
    }
    let mut traj = FlowTrajectory {
        states: vec![first],
        diagnostics: Vec::new(),
        reference_moments: reference.clone(),
        rejected_steps: 0,
        termination: Termination::Completed,
    };
    let span = horizon - state0.time();
    let mut dt = opts.dt0.clamp(opts.dt_min, opts.dt_max);
    let mut clean = 0usize;

    loop {
        let current = traj.last();
        let remaining = horizon - current.time();
        if remaining <= 1e-12 * span.max(1.0) {
            break;
        }
        let h = dt.min(remaining);
        let attempt = flow_step(current, h, opts);
        let retry = |traj: &mut FlowTrajectory, dt: &mut f64, clean: &mut usize, cause: Error| -> Option<Termination> {
            if !opts.adaptive {
                return Some(Termination::Failed(cause));
            }
            traj.rejected_steps += 1;
            *clean = 0;
            *dt *= 0.5;
            if *dt < opts.dt_min {
                return Some(Termination::Failed(Error::StepSizeUnderflow { dt: *dt, dt_min: opts.dt_min }));
            }
            None
        };
        let outcome = match attempt {
            Ok(o) => o,
            Err(e @ (Error::NoConvergence { .. } | Error::NonStarShaped { .. } | Error::BoundaryTooClose { .. })) => {
                match retry(&mut traj, &mut dt, &mut clean, e) {
                    Some(term) => {
                        traj.termination = term;
                        break;
                    }
                    None => continue,
                }
            }
            Err(e) => {
                traj.termination = Termination::Failed(e);
                break;
            }
        };
        let drift_vector = match (&reference, &outcome.predicted_moments) {
            (Some(r), Some(m)) => Some(m.values.iter().zip(&r.values).map(|(a, b)| a - b).collect::<Vec<f64>>()),
            _ => None,
        };
        let drift = drift_vector.as_ref().map(|v| v.iter().fold(0.0f64, |a, b| a.max(b.abs())));
        if opts.adaptive && drift.is_some_and(|d| d > opts.drift_tol) {
            let d = drift.unwrap_or_default();
            match retry(&mut traj, &mut dt, &mut clean, Error::OutOfRange(format!("moment drift {d:.3e}"))) {
                Some(term) => {
                    traj.termination = term;
                    break;
                }
                None => continue,
            }
        }

        let mut next = outcome.state;
        let (kind, margin) = if next.is_converged() {
            match classify(&next, None) {
                Ok(rec) => {
                    let km = (Some(rec.kind), Some(rec.nondegeneracy_margin));
                    next.set_classification(rec);
                    km
                }
                Err(e) => {
                    traj.termination = Termination::Failed(e);
                    break;
                }
            }
        } else {
            (None, None)
        };
        traj.diagnostics.push(StepDiagnostics {
            t: next.time(),
            dt: h,
            predicted_residual: outcome.predicted_residual,
            residual: next.residual_norm(),
            drift,
            drift_vector,
            kind,
            margin,
            newton_iterations: outcome.newton_iterations,
            equivalent_radius: next.inner().equivalent_radius(),
        });
        let t_now = next.time();
        traj.states.push(next);

        if let Some(m) = margin.filter(|m| *m < opts.parabolic_margin) {
            traj.termination = Termination::ParabolicApproach { t: t_now, margin: m };
            break;
        }
        if opts.adaptive {
            clean += 1;
            if clean >= 5 {
                dt = (dt * 1.25).min(opts.dt_max);
                clean = 0;
            }
        }
    }
    Ok(traj)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowStatus {
    Converged,
    NoConvergence,
    Failed(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchRow {
    pub q: f64,
    pub seed: usize,
    pub seed_radius: f64,
    pub status: RowStatus,
    pub area: Option<f64>,
    pub equivalent_radius: Option<f64>,
    pub kind: Option<Kind>,
    pub margin: Option<f64>,
    pub iterations: Option<usize>,
    pub curve: Option<BoundaryCurve>,
}

/// Grids and solver settings shared by all rows of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub n_outer: usize,
    pub n_inner: usize,
    pub newton: NewtonOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { n_outer: 128, n_inner: 128, newton: NewtonOptions::default() }
    }
}

/// Newton-corrects every seed at every `Q` value; `schedule_for(q)` builds the
/// schedule of a row. Rows are computed in parallel and returned ordered by
/// `(q index, seed index)`. Failures are recorded per row.
pub fn branch_sweep<F>(
    outer: &BoundaryCurve,
    q_values: &[f64],
    seeds: &[BoundaryCurve],
    schedule_for: F,
    opts: &SweepOptions,
) -> Vec<BranchRow>
where
    F: Fn(f64) -> Arc<dyn QSchedule> + Sync,
{
    let jobs: Vec<(f64, usize)> = q_values.iter().flat_map(|&q| (0..seeds.len()).map(move |i| (q, i))).collect();
    jobs.par_iter()
        .map(|&(q, i)| {
            let seed = &seeds[i];
            let mut row = BranchRow {
                q,
                seed: i,
                seed_radius: seed.equivalent_radius(),
                status: RowStatus::Converged,
                area: None,
                equivalent_radius: None,
                kind: None,
                margin: None,
                iterations: None,
                curve: None,
            };
            let solved = state_for(outer, seed, opts.n_outer, opts.n_inner, schedule_for(q), 0.0)
                .and_then(|s| newton_correct(&s, &opts.newton))
                .and_then(|out| classify(&out.state, None).map(|rec| (out, rec)));
            match solved {
                Ok((out, rec)) => {
                    let c = out.state.inner();
                    row.area = Some(c.area());
                    row.equivalent_radius = Some(c.equivalent_radius());
                    row.kind = Some(rec.kind);
                    row.margin = Some(rec.nondegeneracy_margin);
                    row.iterations = Some(out.iterations);
                    row.curve = Some(c.clone());
                }
                Err(Error::NoConvergence { .. } | Error::NonStarShaped { .. } | Error::BoundaryTooClose { .. }) => {
                    row.status = RowStatus::NoConvergence;
                }
                Err(e) => row.status = RowStatus::Failed(e.kind().to_string()),
            }
            row
        })
        .collect()
}
