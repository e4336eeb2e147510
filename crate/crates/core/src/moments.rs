//! Harmonic moments of a free boundary in the unit disk.
//!
//! For `h` harmonic in the annulus with `h = 0` on the unit circle, Green's
//! identity gives `∫_∂A Q h dσ = ∫_∂A ∂h/∂ν dσ` at any solution, so the map
//! `t ↦ ∫_∂A Q h dσ` is determined by the flux of `h` alone. With the basis
//! below the flux is constant for every `h` except `log|x|`, whose flux is
//! `-2π`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::curve::{integrate_boundary, CurveSamples};
use crate::error::{Error, Result};
use crate::operator::SolutionState;

/// A harmonic function on the punctured plane.
pub trait HarmonicFunction {
    fn value(&self, x: [f64; 2]) -> f64;
    fn gradient(&self, x: [f64; 2]) -> [f64; 2];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Cos,
    Sin,
}

/// `log|x|` for `k = 0`, otherwise `(r^k - r^{-k}) cos kθ` or `(r^k - r^{-k}) sin kθ`.
/// All of them vanish on the unit circle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarmonicTestFunction {
    pub k: u32,
    pub parity: Parity,
}

impl HarmonicTestFunction {
    pub fn log() -> Self {
        HarmonicTestFunction { k: 0, parity: Parity::Cos }
    }

    pub fn cos(k: u32) -> Self {
        HarmonicTestFunction { k, parity: Parity::Cos }
    }

    pub fn sin(k: u32) -> Self {
        HarmonicTestFunction { k, parity: Parity::Sin }
    }

    /// `m_0`, `m_1c`, `m_1s`, ...
    pub fn label(&self) -> String {
        match (self.k, self.parity) {
            (0, _) => "m_0".to_string(),
            (k, Parity::Cos) => format!("m_{k}c"),
            (k, Parity::Sin) => format!("m_{k}s"),
        }
    }

    /// `f(z) = z^k - z^{-k}` (cos) or `z^k + z^{-k}` (sin), so that the test
    /// function is `Re f` or `Im f`.
    fn analytic(&self, z: Complex64) -> (Complex64, Complex64) {
        let k = self.k as i32;
        let zk = z.powi(k);
        let zmk = z.powi(-k);
        let kf = self.k as f64;
        match self.parity {
            Parity::Cos => (zk - zmk, kf * (z.powi(k - 1) + z.powi(-k - 1))),
            Parity::Sin => (zk + zmk, kf * (z.powi(k - 1) - z.powi(-k - 1))),
        }
    }
}

impl HarmonicFunction for HarmonicTestFunction {
    fn value(&self, x: [f64; 2]) -> f64 {
        if self.k == 0 {
            return 0.5 * (x[0] * x[0] + x[1] * x[1]).ln();
        }
        let (f, _) = self.analytic(Complex64::new(x[0], x[1]));
        match self.parity {
            Parity::Cos => f.re,
            Parity::Sin => f.im,
        }
    }

    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        if self.k == 0 {
            let r2 = x[0] * x[0] + x[1] * x[1];
            return [x[0] / r2, x[1] / r2];
        }
        let (_, df) = self.analytic(Complex64::new(x[0], x[1]));
        // ∇Re f = conj f', ∇Im f = i conj f'
        match self.parity {
            Parity::Cos => [df.re, -df.im],
            Parity::Sin => [df.im, df.re],
        }
    }
}

/// `log|x|` then cos/sin pairs for `k = 1..=k_max`: `2 k_max + 1` functions.
pub fn harmonic_test_basis(k_max: u32) -> Vec<HarmonicTestFunction> {
    let mut out = vec![HarmonicTestFunction::log()];
    for k in 1..=k_max {
        out.push(HarmonicTestFunction::cos(k));
        out.push(HarmonicTestFunction::sin(k));
    }
    out
}

/// Flux `∫_∂A ∂h/∂ν dσ` of a basis function through a curve enclosing the origin.
pub fn expected_flux(h: &HarmonicTestFunction) -> f64 {
    if h.k == 0 {
        -2.0 * PI
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub t: f64,
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

impl MomentVector {
    pub fn get(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|i| self.values[i])
    }

    /// Largest componentwise difference to `other` (same basis assumed).
    pub fn max_drift(&self, other: &MomentVector) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn check_setting(state: &SolutionState) -> Result<()> {
    if !state.domain().outer().is_unit_circle(1e-12) {
        return Err(Error::OuterNotDisk);
    }
    if !state.inner().contains([0.0, 0.0]) {
        return Err(Error::OriginNotEnclosed);
    }
    Ok(())
}

/// `∫_∂A Q h dσ` for each `h` in `basis`.
pub fn moments(state: &SolutionState, basis: &[HarmonicTestFunction]) -> Result<MomentVector> {
    check_setting(state)?;
    moments_on(state.domain().inner_samples(), &state.q().values, state.time(), basis)
}

/// Moments of an arbitrary sampled curve carrying `Q` values `q`; no potential
/// solve is involved, so this also measures predicted (uncorrected) curves.
pub fn moments_on(samples: &CurveSamples, q: &[f64], t: f64, basis: &[HarmonicTestFunction]) -> Result<MomentVector> {
    if q.len() != samples.len() {
        return Err(Error::GridMismatch { expected: samples.len(), got: q.len() });
    }
    let mut values = Vec::with_capacity(basis.len());
    for h in basis {
        let f: Vec<f64> = samples.points.iter().zip(q).map(|(x, qv)| qv * h.value(*x)).collect();
        values.push(integrate_boundary(samples, &f)?);
    }
    Ok(MomentVector { t, labels: basis.iter().map(|h| h.label()).collect(), values })
}

/// `∫_∂A Q h dσ - ∫_∂A ∂h/∂ν dσ`, which vanishes at a solution for any `h`
/// harmonic in the annulus with `h = 0` on the unit circle.
pub fn quadrature_residual(state: &SolutionState, h: &dyn HarmonicFunction) -> Result<f64> {
    check_setting(state)?;
    let s = state.domain().inner_samples();
    let q = &state.q().values;
    let f: Vec<f64> = (0..s.len())
        .map(|i| {
            let x = s.points[i];
            let g = h.gradient(x);
            q[i] * h.value(x) - (g[0] * s.normal[i][0] + g[1] * s.normal[i][1])
        })
        .collect();
    state.integrate(&f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_vanishes_on_unit_circle_and_is_harmonic() {
        for h in harmonic_test_basis(8) {
            for i in 0..16 {
                let a = 0.3 + i as f64 * 0.39;
                assert!(h.value([a.cos(), a.sin()]).abs() < 1e-13, "{}", h.label());
            }
            for x in [[0.4, 0.1], [-0.2, 0.55], [0.7, -0.3]] {
                let d = 1e-3;
                let lap = h.value([x[0] + d, x[1]]) + h.value([x[0] - d, x[1]]) + h.value([x[0], x[1] + d])
                    + h.value([x[0], x[1] - d])
                    - 4.0 * h.value(x);
                let scale = h.value(x).abs().max(1.0);
                assert!((lap / (d * d)).abs() < 1e-3 * scale * 10f64.powi(h.k as i32), "{} {lap}", h.label());
            }
        }
    }

    #[test]
    fn gradient_matches_finite_difference() {
        for h in harmonic_test_basis(4) {
            let x = [0.35, -0.2];
            let d = 1e-6;
            let fd = [
                (h.value([x[0] + d, x[1]]) - h.value([x[0] - d, x[1]])) / (2.0 * d),
                (h.value([x[0], x[1] + d]) - h.value([x[0], x[1] - d])) / (2.0 * d),
            ];
            let g = h.gradient(x);
            for c in 0..2 {
                assert!((fd[c] - g[c]).abs() < 1e-6 * g[c].abs().max(1.0), "{} {:?} {:?}", h.label(), fd, g);
            }
        }
    }

    #[test]
    fn labels() {
        let labels: Vec<_> = harmonic_test_basis(2).iter().map(|h| h.label()).collect();
        assert_eq!(labels, ["m_0", "m_1c", "m_1s", "m_2c", "m_2s"]);
    }
}
