//! Closed-form concentric solutions in the unit ball.
//!
//! For `A = B_r` inside `Ω = B_1` the capacitary potential is radial and
//! `∂u/∂ν` on `∂A` is `-1/(r log r)` in the plane and
//! `(n-2)/(r(1-r^{n-2}))` for `n >= 3`. That function of `r` is convex with a
//! single minimum at `r*`, giving two branches `r1(Q) < r* < r2(Q)` for every
//! `Q > Q*`, one point at `Q = Q*` and none below.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which branch a concentric solution belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// `r < r*`: shrinks as `Q` grows (hyperbolic).
    Lower,
    /// `r > r*`: grows with `Q` (elliptic).
    Upper,
    Critical,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialBranchPoint {
    pub n: u32,
    pub r: f64,
    pub q: f64,
    pub branch: Branch,
}

fn check_dim(n: u32) -> Result<()> {
    if n == 2 || n == 3 {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("dimension {n} (supported: 2, 3)")))
    }
}

/// `∂u_r/∂ν` on `∂B_r` for the capacitary potential in `B_1 \ B_r`.
pub fn radial_q(r: f64, n: u32) -> Result<f64> {
    check_dim(n)?;
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::OutOfRange(format!("radius {r} outside (0, 1)")));
    }
    Ok(q_unchecked(r, n))
}

fn q_unchecked(r: f64, n: u32) -> f64 {
    if n == 2 {
        -1.0 / (r * r.ln())
    } else {
        let m = n as f64 - 2.0;
        m / (r * (1.0 - r.powf(m)))
    }
}

/// `dQ/dr`.
fn dq_unchecked(r: f64, n: u32) -> f64 {
    if n == 2 {
        let f = r * r.ln();
        (r.ln() + 1.0) / (f * f)
    } else {
        let m = n as f64 - 2.0;
        let f = r * (1.0 - r.powf(m));
        let df = 1.0 - (m + 1.0) * r.powf(m);
        -m * df / (f * f)
    }
}

/// Critical radius `r*` and the minimal value `Q* = Q(r*)`.
pub fn critical(n: u32) -> Result<(f64, f64)> {
    check_dim(n)?;
    let r = if n == 2 {
        (-1.0f64).exp()
    } else {
        (n as f64 - 1.0).powf(-1.0 / (n as f64 - 2.0))
    };
    Ok((r, q_unchecked(r, n)))
}

fn classify_radius(r: f64, r_star: f64) -> Branch {
    if (r - r_star).abs() < 1e-12 {
        Branch::Critical
    } else if r < r_star {
        Branch::Lower
    } else {
        Branch::Upper
    }
}

impl RadialBranchPoint {
    pub fn at_radius(r: f64, n: u32) -> Result<Self> {
        let q = radial_q(r, n)?;
        let (r_star, _) = critical(n)?;
        Ok(RadialBranchPoint { n, r, q, branch: classify_radius(r, r_star) })
    }
}

/// Root of the monotone function `Q(r) - target` on `[lo, hi]`: bisection to
/// `1e-6`, then Newton to `1e-12` with the closed-form derivative.
fn bracketed_root(target: f64, n: u32, mut lo: f64, mut hi: f64) -> f64 {
    let f = |r: f64| q_unchecked(r, n) - target;
    let f_lo = f(lo);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut r = 0.5 * (lo + hi);
    for _ in 0..50 {
        let step = f(r) / dq_unchecked(r, n);
        let next = (r - step).clamp(lo, hi);
        let done = (next - r).abs() < 1e-15;
        r = next;
        if done {
            break;
        }
    }
    r
}

/// Radial solutions for a given `Q`: two points for `Q > Q*`, the critical
/// point at `Q = Q*` (relative tolerance `1e-12`), none below.
pub fn radial_branch_roots(q: f64, n: u32) -> Result<Option<(RadialBranchPoint, RadialBranchPoint)>> {
    check_dim(n)?;
    if !(q > 0.0) {
        return Err(Error::OutOfRange(format!("Q = {q} must be positive")));
    }
    let (r_star, q_star) = critical(n)?;
    if (q - q_star).abs() <= 1e-12 * q_star {
        let p = RadialBranchPoint { n, r: r_star, q: q_star, branch: Branch::Critical };
        return Ok(Some((p, p)));
    }
    if q < q_star {
        return Ok(None);
    }
    let r1 = bracketed_root(q, n, 1e-300, r_star);
    let r2 = bracketed_root(q, n, r_star, 1.0 - f64::EPSILON);
    Ok(Some((
        RadialBranchPoint { n, r: r1, q, branch: Branch::Lower },
        RadialBranchPoint { n, r: r2, q, branch: Branch::Upper },
    )))
}

/// Linearized Robin problem on `B_1 \ B_r` (plane) with constant data `φ`:
/// `p = c log|x|`, `c = -rφ/(1 + log r)`. Returns `(p|∂B_r, ∫_{∂B_r} p dσ)`.
pub fn radial_linearized(r: f64, phi: f64) -> Result<(f64, f64)> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::OutOfRange(format!("radius {r} outside (0, 1)")));
    }
    let (r_star, _) = critical(2)?;
    if (r - r_star).abs() < 1e-12 {
        return Err(Error::DegenerateRadius(r));
    }
    let c = -r * phi / (1.0 + r.ln());
    let p = c * r.ln();
    Ok((p, 2.0 * PI * r * p))
}

/// `d/dr` of `∂u_r/∂ν` in the plane; the response of the free-boundary
/// residual to a uniform radial displacement.
pub fn radial_q_derivative(r: f64, n: u32) -> Result<f64> {
    radial_q(r, n)?;
    Ok(dq_unchecked(r, n))
}
