//! Prescribed boundary data `Q(x, t) > 0` and its derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smoothness class of a schedule, as far as the solver is concerned.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Smoothness {
    /// Real-analytic in space and time.
    Analytic,
    /// Continuous with piecewise-smooth gradient (tabulated data).
    Piecewise,
}

pub trait QSchedule: Send + Sync + std::fmt::Debug {
    fn value(&self, x: [f64; 2], t: f64) -> f64;
    fn gradient(&self, x: [f64; 2], t: f64) -> [f64; 2];
    fn time_derivative(&self, x: [f64; 2], t: f64) -> f64;
    fn smoothness(&self) -> Smoothness {
        Smoothness::Analytic
    }
}

/// `Q(x, t) = (q0 + q1 t)(1 + w·x)`. Covers constant, affine-in-time and
/// tilted schedules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineSchedule {
    pub q0: f64,
    #[serde(default)]
    pub q1: f64,
    #[serde(default)]
    pub tilt: [f64; 2],
}

impl AffineSchedule {
    pub fn constant(q: f64) -> Self {
        AffineSchedule { q0: q, q1: 0.0, tilt: [0.0, 0.0] }
    }

    pub fn linear(q0: f64, q1: f64) -> Self {
        AffineSchedule { q0, q1, tilt: [0.0, 0.0] }
    }

    pub fn tilted(q0: f64, q1: f64, tilt: [f64; 2]) -> Self {
        AffineSchedule { q0, q1, tilt }
    }

    fn spatial(&self, x: [f64; 2]) -> f64 {
        1.0 + self.tilt[0] * x[0] + self.tilt[1] * x[1]
    }
}

impl QSchedule for AffineSchedule {
    fn value(&self, x: [f64; 2], t: f64) -> f64 {
        (self.q0 + self.q1 * t) * self.spatial(x)
    }

    fn gradient(&self, _x: [f64; 2], t: f64) -> [f64; 2] {
        let a = self.q0 + self.q1 * t;
        [a * self.tilt[0], a * self.tilt[1]]
    }

    fn time_derivative(&self, x: [f64; 2], _t: f64) -> f64 {
        self.q1 * self.spatial(x)
    }
}

/// Tabulated spatial profile on a uniform grid, bilinearly interpolated and
/// scaled by `(q0 + q1 t)`. Points outside the grid are clamped to its edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableSchedule {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// Row-major `ny × nx` samples; `values[j][i]` sits at `(x_i, y_j)`.
    pub values: Vec<Vec<f64>>,
    pub q0: f64,
    #[serde(default)]
    pub q1: f64,
}

impl TableSchedule {
    pub fn validate(&self) -> Result<()> {
        let ny = self.values.len();
        let nx = self.values.first().map_or(0, Vec::len);
        if nx < 2 || ny < 2 || self.values.iter().any(|r| r.len() != nx) {
            return Err(Error::InvalidInput("table needs a rectangular grid of at least 2x2".into()));
        }
        if !(self.x_max > self.x_min && self.y_max > self.y_min) {
            return Err(Error::InvalidInput("table bounds are empty".into()));
        }
        Ok(())
    }

    /// Interpolated profile and its gradient.
    fn profile(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        let ny = self.values.len();
        let nx = self.values[0].len();
        let hx = (self.x_max - self.x_min) / (nx - 1) as f64;
        let hy = (self.y_max - self.y_min) / (ny - 1) as f64;
        let fx = ((x[0] - self.x_min) / hx).clamp(0.0, (nx - 1) as f64);
        let fy = ((x[1] - self.y_min) / hy).clamp(0.0, (ny - 1) as f64);
        let i = (fx.floor() as usize).min(nx - 2);
        let j = (fy.floor() as usize).min(ny - 2);
        let (sx, sy) = (fx - i as f64, fy - j as f64);
        let v00 = self.values[j][i];
        let v10 = self.values[j][i + 1];
        let v01 = self.values[j + 1][i];
        let v11 = self.values[j + 1][i + 1];
        let value = v00 * (1.0 - sx) * (1.0 - sy) + v10 * sx * (1.0 - sy) + v01 * (1.0 - sx) * sy + v11 * sx * sy;
        let dx = ((v10 - v00) * (1.0 - sy) + (v11 - v01) * sy) / hx;
        let dy = ((v01 - v00) * (1.0 - sx) + (v11 - v10) * sx) / hy;
        (value, [dx, dy])
    }
}

impl QSchedule for TableSchedule {
    fn value(&self, x: [f64; 2], t: f64) -> f64 {
        (self.q0 + self.q1 * t) * self.profile(x).0
    }

    fn gradient(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let a = self.q0 + self.q1 * t;
        let g = self.profile(x).1;
        [a * g[0], a * g[1]]
    }

    fn time_derivative(&self, x: [f64; 2], _t: f64) -> f64 {
        self.q1 * self.profile(x).0
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::Piecewise
    }
}

/// Checks `Q > 0` on a polar probe grid covering the closed disk of radius
/// `extent` about `center`, at the given times.
pub fn check_positive(schedule: &dyn QSchedule, center: [f64; 2], extent: f64, times: &[f64]) -> Result<()> {
    for &t in times {
        for ir in 0..=8 {
            let rho = extent * ir as f64 / 8.0;
            for ia in 0..32 {
                let a = 2.0 * std::f64::consts::PI * ia as f64 / 32.0;
                let x = [center[0] + rho * a.cos(), center[1] + rho * a.sin()];
                let value = schedule.value(x, t);
                if !(value > 0.0) {
                    return Err(Error::NonPositiveSchedule { x: x[0], y: x[1], t, value });
                }
            }
        }
    }
    Ok(())
}

/// Sign of `∂Q/∂t` on the same probe grid: `Some(1)` if strictly positive,
/// `Some(-1)` if strictly negative, `Some(0)` if identically zero, `None` if mixed.
pub fn time_derivative_sign(schedule: &dyn QSchedule, center: [f64; 2], extent: f64, times: &[f64]) -> Option<i8> {
    let (mut pos, mut neg, mut zero) = (false, false, false);
    for &t in times {
        for ir in 0..=8 {
            let rho = extent * ir as f64 / 8.0;
            for ia in 0..32 {
                let a = 2.0 * std::f64::consts::PI * ia as f64 / 32.0;
                let x = [center[0] + rho * a.cos(), center[1] + rho * a.sin()];
                let d = schedule.time_derivative(x, t);
                if d > 0.0 {
                    pos = true;
                } else if d < 0.0 {
                    neg = true;
                } else {
                    zero = true;
                }
            }
        }
    }
    match (pos, neg, zero) {
        (true, false, false) => Some(1),
        (false, true, false) => Some(-1),
        (false, false, true) => Some(0),
        _ => None,
    }
}
