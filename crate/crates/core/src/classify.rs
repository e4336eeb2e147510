//! Elliptic / hyperbolic / parabolic classification of a converged free
//! boundary, from the Robin solution `p` with unit data.

use serde::{Deserialize, Serialize};

use crate::bie::DEGENERACY_THRESHOLD;
use crate::curve::BoundaryField;
use crate::error::{Error, Result};
use crate::operator::{SolutionState, NEAR_DEGENERATE_MARGIN};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    Elliptic,
    Hyperbolic,
    Parabolic,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Elliptic => "Elliptic",
            Kind::Hyperbolic => "Hyperbolic",
            Kind::Parabolic => "Parabolic",
        }
    }
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRecord {
    pub kind: Kind,
    /// `∫_∂A p dσ` for the Robin solution with `φ ≡ 1`.
    pub integral_p: f64,
    /// `p` has the strict sign matching `kind` everywhere on `∂A`.
    pub monotone: bool,
    pub nondegeneracy_margin: f64,
    /// `H + Q + ∂νQ/Q > 0` on `∂A`.
    pub criterion_ok: bool,
    /// The Robin operator was numerically singular and `p` is a least-squares
    /// solution.
    pub degenerate: bool,
    pub tau_par: f64,
    pub p_trace: BoundaryField,
}

/// Smallest singular value of the discrete Robin operator relative to the largest.
pub fn nondegeneracy_margin(state: &SolutionState) -> Result<f64> {
    Ok(state.robin_system()?.margin())
}

/// Sufficient condition for an elliptic, monotone, non-degenerate solution:
/// `H + Q + ∂νQ/Q > 0` on `∂A`. Returns the verdict and the field.
pub fn acker_criterion(state: &SolutionState) -> (bool, BoundaryField) {
    let s = state.domain().inner_samples();
    let q = state.q();
    let field: BoundaryField = (0..s.len())
        .map(|i| s.curvature[i] + q.values[i] + q.normal_derivative[i] / q.values[i])
        .collect::<Vec<_>>()
        .into();
    (field.min() > 0.0, field)
}

/// Classifies a converged state. `tau_par` defaults to `1e-6 |∂A|`.
///
/// States whose margin is below the near-degeneracy threshold are parabolic
/// regardless of `∫p`: close to a fold `∫p` blows up instead of vanishing.
pub fn classify(state: &SolutionState, tau_par: Option<f64>) -> Result<ClassificationRecord> {
    if !state.is_converged() {
        return Err(Error::InvalidInput(format!(
            "classification needs a converged state (residual {:.3e})",
            state.residual_norm()
        )));
    }
    let s = state.domain().inner_samples();
    let tau = tau_par.unwrap_or(1e-6 * s.length());
    if !(tau >= 0.0) {
        return Err(Error::InvalidInput(format!("tau_par = {tau} must be nonnegative")));
    }
    let robin = state.robin_system()?;
    let margin = robin.margin();
    let ones = vec![1.0; s.len()];
    let degenerate = margin < DEGENERACY_THRESHOLD;
    let p = if degenerate { robin.solve_truncated(&ones, DEGENERACY_THRESHOLD) } else { robin.solve(&ones)? };
    let integral_p = state.integrate(&p)?;

    let kind = if margin < NEAR_DEGENERATE_MARGIN {
        Kind::Parabolic
    } else if integral_p > tau {
        Kind::Elliptic
    } else if integral_p < -tau {
        Kind::Hyperbolic
    } else {
        Kind::Parabolic
    };
    let floor = 1e-8 * p.max_abs();
    let monotone = match kind {
        Kind::Elliptic => p.iter().all(|v| *v > floor),
        Kind::Hyperbolic => p.iter().all(|v| *v < -floor),
        Kind::Parabolic => false,
    };
    let (criterion_ok, _) = acker_criterion(state);
    Ok(ClassificationRecord {
        kind,
        integral_p,
        monotone,
        nondegeneracy_margin: margin,
        criterion_ok,
        degenerate,
        tau_par: tau,
        p_trace: p,
    })
}

/// Classifies and stores the record on the state.
pub fn classify_in_place(state: &mut SolutionState, tau_par: Option<f64>) -> Result<&ClassificationRecord> {
    let record = classify(state, tau_par)?;
    state.set_classification(record);
    Ok(state.classification().expect("just set"))
}
