//! Free-boundary residual `F = ∂u/∂ν - Q` on `∂A`, its linearization, and the
//! quasi-Newton correction built on the Robin inverse.
//!
//! Perturbations are radial displacements `δR(θ)` of the polar graph, sampled
//! on the inner nodes. A displacement `δR` moves the boundary by `-g δR` along
//! `ν` (which points into `A`) and by `δR R'/s` along the unit tangent.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bie::{solve_capacitary, AnnularDomain, PotentialSolution, RobinSystem};
use crate::classify::ClassificationRecord;
use crate::curve::{integrate_boundary, BoundaryCurve, BoundaryField};
use crate::error::{Error, Result};
use crate::schedule::QSchedule;
use crate::spectral;

/// Newton correction stops below this sup-norm residual by default.
pub const DEFAULT_NEWTON_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 25;
/// Normalized Robin singular value below which a converged state carries a
/// [`Warning::NearDegenerate`].
pub const NEAR_DEGENERATE_MARGIN: f64 = 1e-5;

/// `Q(·, t)` sampled on the inner nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QSnapshot {
    pub t: f64,
    pub values: BoundaryField,
    /// `∇Q·ν`.
    pub normal_derivative: BoundaryField,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Warning {
    /// Converged, but the linearization is close to singular.
    NearDegenerate { margin: f64 },
}

/// A candidate or converged free boundary with everything downstream needs.
#[derive(Clone)]
pub struct SolutionState {
    domain: Arc<AnnularDomain>,
    schedule: Arc<dyn QSchedule>,
    q: QSnapshot,
    potential: PotentialSolution,
    residual: BoundaryField,
    residual_norm: f64,
    converged: bool,
    classification: Option<ClassificationRecord>,
    warnings: Vec<Warning>,
    dtn: Arc<OnceLock<DMatrix<f64>>>,
}

impl std::fmt::Debug for SolutionState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolutionState")
            .field("t", &self.q.t)
            .field("inner", self.domain.inner())
            .field("residual_norm", &self.residual_norm)
            .field("converged", &self.converged)
            .field("classification", &self.classification.as_ref().map(|c| c.kind))
            .finish()
    }
}

impl SolutionState {
    pub fn domain(&self) -> &AnnularDomain {
        &self.domain
    }

    pub fn inner(&self) -> &BoundaryCurve {
        self.domain.inner()
    }

    pub fn schedule(&self) -> &Arc<dyn QSchedule> {
        &self.schedule
    }

    pub fn time(&self) -> f64 {
        self.q.t
    }

    pub fn q(&self) -> &QSnapshot {
        &self.q
    }

    pub fn potential(&self) -> &PotentialSolution {
        &self.potential
    }

    pub fn residual(&self) -> &BoundaryField {
        &self.residual
    }

    pub fn residual_norm(&self) -> f64 {
        self.residual_norm
    }

    pub fn is_converged(&self) -> bool {
        self.converged
    }

    pub fn classification(&self) -> Option<&ClassificationRecord> {
        self.classification.as_ref()
    }

    pub fn set_classification(&mut self, record: ClassificationRecord) {
        self.classification = Some(record);
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    /// `∂u/∂ν` on `∂A`.
    pub fn normal_derivative(&self) -> &BoundaryField {
        self.potential.inner_normal_derivative()
    }

    /// Dirichlet-to-Neumann matrix of the current annulus, computed once.
    pub fn dtn(&self) -> &DMatrix<f64> {
        self.dtn.get_or_init(|| self.potential.system().inner_dtn())
    }

    /// Robin coefficient `H + ∂νQ/Q` on `∂A`.
    pub fn robin_coefficient(&self) -> BoundaryField {
        let s = self.domain.inner_samples();
        BoundaryField(
            (0..s.len())
                .map(|i| s.curvature[i] + self.q.normal_derivative[i] / self.q.values[i])
                .collect(),
        )
    }

    /// Discrete linearized Robin operator at this state.
    pub fn robin_system(&self) -> Result<RobinSystem> {
        RobinSystem::new(self.dtn(), &self.robin_coefficient())
    }

    /// `∫_∂A f dσ` on the inner nodes.
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        integrate_boundary(self.domain.inner_samples(), f)
    }

    /// Recomputes the residual from scratch (same curve, schedule and time).
    pub fn recompute(&self) -> Result<SolutionState> {
        eval_f(self.domain.as_ref(), self.schedule.clone(), self.q.t)
    }

    /// Marks the state as converged for `tol` if its residual is below it.
    fn mark_converged(mut self, tol: f64) -> Self {
        self.converged = self.residual_norm < tol;
        self
    }
}

fn sample_schedule(domain: &AnnularDomain, schedule: &dyn QSchedule, t: f64) -> Result<QSnapshot> {
    let s = domain.inner_samples();
    let mut values = Vec::with_capacity(s.len());
    let mut dnu = Vec::with_capacity(s.len());
    for (x, nu) in s.points.iter().zip(&s.normal) {
        let value = schedule.value(*x, t);
        if !(value > 0.0) {
            return Err(Error::NonPositiveSchedule { x: x[0], y: x[1], t, value });
        }
        let g = schedule.gradient(*x, t);
        values.push(value);
        dnu.push(g[0] * nu[0] + g[1] * nu[1]);
    }
    Ok(QSnapshot { t, values: values.into(), normal_derivative: dnu.into() })
}

/// Evaluates the free-boundary residual `F = ∂u/∂ν - Q(·, t)` on `∂A`.
pub fn eval_f(domain: &AnnularDomain, schedule: Arc<dyn QSchedule>, t: f64) -> Result<SolutionState> {
    let q = sample_schedule(domain, schedule.as_ref(), t)?;
    let potential = solve_capacitary(domain)?;
    let residual = potential.inner_normal_derivative().zip_map(&q.values, |a, b| a - b);
    let residual_norm = residual.max_abs();
    Ok(SolutionState {
        domain: Arc::new(domain.clone()),
        schedule,
        q,
        potential,
        residual,
        residual_norm,
        converged: false,
        classification: None,
        warnings: Vec::new(),
        dtn: Arc::new(OnceLock::new()),
    })
}

/// Directional derivative of `F` along the radial displacement `δR`:
///
/// `H p + ∂p/∂ν + (∂νQ) g δR + (δR R'/s) ∂F/∂s`, with `p` harmonic, `p = 0` on
/// the container and `p = (∂u/∂ν) g δR` on `∂A`.
pub fn apply_linearization(state: &SolutionState, rho_dot: &[f64]) -> Result<BoundaryField> {
    let s = state.domain.inner_samples();
    let n = s.len();
    if rho_dot.len() != n {
        return Err(Error::GridMismatch { expected: n, got: rho_dot.len() });
    }
    let dudnu = state.normal_derivative();
    let p: Vec<f64> = (0..n).map(|i| dudnu[i] * s.metric[i] * rho_dot[i]).collect();
    let dpdnu = state.dtn() * nalgebra::DVector::from_column_slice(&p);
    let dfdtheta = spectral::differentiate(&state.residual);
    let out = (0..n)
        .map(|i| {
            let normal = s.curvature[i] * p[i] + dpdnu[i] + state.q.normal_derivative[i] * s.metric[i] * rho_dot[i];
            let tangential = rho_dot[i] * s.radius_derivative[i] * dfdtheta[i] / (s.speed[i] * s.speed[i]);
            normal + tangential
        })
        .collect();
    Ok(BoundaryField(out))
}

/// Inverse of the linearization at a solution: the radial displacement
/// `δR = p/(Q g)` where `p` solves the Robin problem with data `φ`.
pub fn apply_inverse(state: &SolutionState, phi: &[f64]) -> Result<BoundaryField> {
    let robin = state.robin_system()?;
    let p = robin.solve(phi)?;
    let s = state.domain.inner_samples();
    Ok(BoundaryField((0..s.len()).map(|i| p[i] / (state.q.values[i] * s.metric[i])).collect()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: DEFAULT_NEWTON_TOL, max_iter: DEFAULT_MAX_ITER, max_halvings: 8 }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub state: SolutionState,
    pub iterations: usize,
    /// Residual sup-norm before the first and after every accepted iteration.
    pub history: Vec<f64>,
}

/// Corrects `state` towards `F = 0` at its own time label.
///
/// Each iteration solves the Robin problem with data `F`, takes the radial
/// step `-p/(Q g)` projected onto the curve's Fourier modes, and halves it
/// (at most `max_halvings` times) until the residual decreases.
pub fn newton_correct(state: &SolutionState, opts: &NewtonOptions) -> Result<NewtonOutcome> {
    let mut current = state.clone();
    let mut history = vec![current.residual_norm];
    let mut iterations = 0;
    while current.residual_norm >= opts.tol {
        if iterations == opts.max_iter {
            return Err(Error::NoConvergence { iterations, residual: current.residual_norm });
        }
        let robin = current.robin_system()?;
        let p = robin.solve(&current.residual)?;
        let s = current.domain.inner_samples();
        let step: Vec<f64> = (0..s.len()).map(|i| -p[i] / (current.q.values[i] * s.metric[i])).collect();

        let mut scale = 1.0;
        let mut accepted = None;
        let mut last_err = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = step.iter().map(|v| v * scale).collect();
            match try_step(&current, &trial) {
                Ok(next) if next.residual_norm < current.residual_norm => {
                    accepted = Some(next);
                    break;
                }
                Ok(_) => {}
                Err(e) => last_err = Some(e),
            }
            scale *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some(next) => {
                history.push(next.residual_norm);
                current = next;
            }
            None => {
                return Err(match last_err {
                    Some(e @ Error::NonStarShaped { .. }) => e,
                    _ => Error::NoConvergence { iterations, residual: current.residual_norm },
                })
            }
        }
    }
    let mut state = current.mark_converged(opts.tol);
    let margin = state.robin_system()?.margin();
    if margin < NEAR_DEGENERATE_MARGIN {
        state.warnings.push(Warning::NearDegenerate { margin });
    }
    Ok(NewtonOutcome { state, iterations, history })
}

fn try_step(current: &SolutionState, delta: &[f64]) -> Result<SolutionState> {
    let curve = current.domain.inner().displaced(delta)?;
    let domain = current.domain.with_inner(curve)?;
    eval_f(&domain, current.schedule.clone(), current.q.t)
}

/// Convenience: residual state for `inner` in `outer` on default grids, at time `t`.
pub fn state_for(
    outer: &BoundaryCurve,
    inner: &BoundaryCurve,
    n_outer: usize,
    n_inner: usize,
    schedule: Arc<dyn QSchedule>,
    t: f64,
) -> Result<SolutionState> {
    let domain = AnnularDomain::new(outer.clone(), inner.clone(), n_outer, n_inner)?;
    eval_f(&domain, schedule, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::{radial_q, radial_q_derivative};
    use crate::schedule::AffineSchedule;

    fn radial_state(r: f64, q: f64, n: usize) -> SolutionState {
        let inner = BoundaryCurve::circle([0.0, 0.0], r).unwrap();
        state_for(&BoundaryCurve::unit_circle(), &inner, n, n, Arc::new(AffineSchedule::constant(q)), 0.0).unwrap()
    }

    #[test]
    fn residual_at_radial_solution() {
        let q = radial_q(0.5, 2).unwrap();
        assert!(radial_state(0.5, q, 128).residual_norm() < 1e-8);
        let s = radial_state(0.5, 3.0, 128);
        for v in s.residual().iter() {
            assert!((v - (q - 3.0)).abs() < 1e-8);
        }
        assert!((q - 3.0 + 0.11461).abs() < 1e-5);
    }

    #[test]
    fn linearization_of_uniform_displacement() {
        let q = radial_q(0.5, 2).unwrap();
        let s = radial_state(0.5, q, 128);
        let lin = apply_linearization(&s, &vec![1.0; 128]).unwrap();
        let exact = radial_q_derivative(0.5, 2).unwrap();
        for v in lin.iter() {
            assert!((v - exact).abs() < 1e-8, "{v} vs {exact}");
        }
        let zero = apply_linearization(&s, &vec![0.0; 128]).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn newton_from_nearby_radius() {
        let q = radial_q(0.5, 2).unwrap();
        let s = radial_state(0.48, q, 128);
        let out = newton_correct(&s, &NewtonOptions::default()).unwrap();
        assert!(out.iterations <= 6, "{} iterations", out.iterations);
        assert!((out.state.inner().a0() - 0.5).abs() < 1e-9);
        assert!(out.state.is_converged());
        assert!(out.state.warnings().is_empty());
    }

    #[test]
    fn newton_at_fixed_point_is_identity() {
        let q = radial_q(0.5, 2).unwrap();
        let s = radial_state(0.5, q, 64);
        let out = newton_correct(&s, &NewtonOptions::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.state.inner(), s.inner());
    }
}
