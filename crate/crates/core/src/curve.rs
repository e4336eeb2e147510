//! Star-shaped closed curves stored as a polar radius series about a center,
//! and their sampled geometry.
//!
//! Orientation: nodes run counterclockwise. The stored normal `ν` points into
//! the enclosed region, i.e. it is the outer normal of the annulus that lies
//! outside the curve. Curvature uses `H = -κ`, where `κ > 0` for a convex
//! counterclockwise curve, so a circle of radius `r` has `H = -1/r`.

use std::f64::consts::PI;
use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral;

/// Real samples on the collocation nodes of one curve.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BoundaryField(pub Vec<f64>);

impl BoundaryField {
    pub fn zeros(n: usize) -> Self {
        BoundaryField(vec![0.0; n])
    }

    pub fn constant(n: usize, value: f64) -> Self {
        BoundaryField(vec![value; n])
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        BoundaryField(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &BoundaryField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.len(), other.len());
        BoundaryField(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for BoundaryField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for BoundaryField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for BoundaryField {
    fn from(v: Vec<f64>) -> Self {
        BoundaryField(v)
    }
}

/// Serialized form: `{center:[x,y], a0, cos:[a1..aK], sin:[b1..bK]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct CurveRepr {
    center: [f64; 2],
    a0: f64,
    #[serde(default)]
    cos: Vec<f64>,
    #[serde(default)]
    sin: Vec<f64>,
}

/// Closed curve `x(θ) = center + R(θ)(cos θ, sin θ)` with
/// `R(θ) = a0 + Σ_{k=1}^K a_k cos kθ + b_k sin kθ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveRepr", into = "CurveRepr")]
pub struct BoundaryCurve {
    center: [f64; 2],
    a0: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl TryFrom<CurveRepr> for BoundaryCurve {
    type Error = Error;
    fn try_from(r: CurveRepr) -> Result<Self> {
        curve_from_fourier(r.center, r.a0, &r.cos, &r.sin)
    }
}

impl From<BoundaryCurve> for CurveRepr {
    fn from(c: BoundaryCurve) -> Self {
        CurveRepr {
            center: c.center,
            a0: c.a0,
            cos: c.cos,
            sin: c.sin,
        }
    }
}

/// Builds a curve from its polar-radius series, checking positivity on a
/// `4K`-point probe grid (at least 8 points) and the resolution guard
/// `|a_K| + |b_K| <= 0.1 a0`.
pub fn curve_from_fourier(center: [f64; 2], a0: f64, cos: &[f64], sin: &[f64]) -> Result<BoundaryCurve> {
    let finite = a0.is_finite()
        && center.iter().all(|v| v.is_finite())
        && cos.iter().chain(sin).all(|v| v.is_finite());
    if !finite {
        return Err(Error::InvalidInput("non-finite curve coefficient".into()));
    }
    if a0 <= 0.0 {
        return Err(Error::NonStarShaped { theta: 0.0, radius: a0 });
    }
    let k = cos.len().max(sin.len());
    let mut cos = cos.to_vec();
    let mut sin = sin.to_vec();
    cos.resize(k, 0.0);
    sin.resize(k, 0.0);
    let curve = BoundaryCurve { center, a0, cos, sin };

    let probes = (4 * k).max(8);
    for i in 0..probes {
        let theta = 2.0 * PI * i as f64 / probes as f64;
        let radius = curve.radius(theta);
        if radius <= 0.0 {
            return Err(Error::NonStarShaped { theta, radius });
        }
    }
    if k > 0 {
        let tail = curve.cos[k - 1].abs() + curve.sin[k - 1].abs();
        let limit = 0.1 * a0;
        if tail > limit {
            return Err(Error::UnresolvedCurve { tail, limit });
        }
    }
    Ok(curve)
}

impl BoundaryCurve {
    pub fn circle(center: [f64; 2], radius: f64) -> Result<Self> {
        curve_from_fourier(center, radius, &[], &[])
    }

    /// The unit circle centered at the origin.
    pub fn unit_circle() -> Self {
        BoundaryCurve {
            center: [0.0, 0.0],
            a0: 1.0,
            cos: Vec::new(),
            sin: Vec::new(),
        }
    }

    pub fn center(&self) -> [f64; 2] {
        self.center
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn cos_coeffs(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin_coeffs(&self) -> &[f64] {
        &self.sin
    }

    /// Truncation degree `K`.
    pub fn degree(&self) -> usize {
        self.cos.len()
    }

    /// Default collocation size `max(64, 8K)`.
    pub fn default_nodes(&self) -> usize {
        (8 * self.degree()).max(64)
    }

    pub fn radius(&self, theta: f64) -> f64 {
        let mut r = self.a0;
        for (k, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let kt = (k + 1) as f64 * theta;
            r += a * kt.cos() + b * kt.sin();
        }
        r
    }

    pub fn radius_derivative(&self, theta: f64) -> f64 {
        let mut r = 0.0;
        for (k, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let kf = (k + 1) as f64;
            let kt = kf * theta;
            r += kf * (-a * kt.sin() + b * kt.cos());
        }
        r
    }

    pub fn point(&self, theta: f64) -> [f64; 2] {
        let r = self.radius(theta);
        [self.center[0] + r * theta.cos(), self.center[1] + r * theta.sin()]
    }

    /// Enclosed area `½∫R² dθ`.
    pub fn area(&self) -> f64 {
        let tail: f64 = self.cos.iter().chain(&self.sin).map(|c| c * c).sum();
        PI * (self.a0 * self.a0 + 0.5 * tail)
    }

    /// Radius of the disk with the same area.
    pub fn equivalent_radius(&self) -> f64 {
        (self.area() / PI).sqrt()
    }

    pub fn is_unit_circle(&self, tol: f64) -> bool {
        self.center[0].abs() <= tol
            && self.center[1].abs() <= tol
            && (self.a0 - 1.0).abs() <= tol
            && self.cos.iter().chain(&self.sin).all(|c| c.abs() <= tol)
    }

    /// Whether the point lies strictly inside the curve.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let rho = dx.hypot(dy);
        rho < self.radius(dy.atan2(dx))
    }

    /// Same curve with a new truncation degree (zero-padded or truncated).
    pub fn with_degree(&self, k: usize) -> Result<Self> {
        let mut cos = self.cos.clone();
        let mut sin = self.sin.clone();
        cos.resize(k, 0.0);
        sin.resize(k, 0.0);
        curve_from_fourier(self.center, self.a0, &cos, &sin)
    }

    /// Adds the radial displacement `delta(θ_i)` given on `N` uniform nodes,
    /// projected onto the curve's own modes `0..=K`.
    pub fn displaced(&self, delta: &[f64]) -> Result<Self> {
        let k = self.degree();
        if delta.len() < 4 * k.max(1) {
            return Err(Error::ResolutionTooLow { nodes: delta.len(), degree: k });
        }
        let (d0, dc, ds) = spectral::real_modes(delta, k);
        let cos: Vec<f64> = self.cos.iter().zip(&dc).map(|(a, b)| a + b).collect();
        let sin: Vec<f64> = self.sin.iter().zip(&ds).map(|(a, b)| a + b).collect();
        curve_from_fourier(self.center, self.a0 + d0, &cos, &sin)
    }

    /// Adds Fourier coefficients directly: `delta_cos[k-1]`, `delta_sin[k-1]`.
    pub fn perturbed(&self, delta_a0: f64, delta_cos: &[f64], delta_sin: &[f64]) -> Result<Self> {
        let k = self.degree().max(delta_cos.len()).max(delta_sin.len());
        let pad = |v: &[f64]| {
            let mut v = v.to_vec();
            v.resize(k, 0.0);
            v
        };
        let (mut cos, mut sin) = (pad(&self.cos), pad(&self.sin));
        for (c, d) in cos.iter_mut().zip(pad(delta_cos)) {
            *c += d;
        }
        for (s, d) in sin.iter_mut().zip(pad(delta_sin)) {
            *s += d;
        }
        curve_from_fourier(self.center, self.a0 + delta_a0, &cos, &sin)
    }

    pub fn translated(&self, shift: [f64; 2]) -> Self {
        BoundaryCurve {
            center: [self.center[0] + shift[0], self.center[1] + shift[1]],
            ..self.clone()
        }
    }

    /// Rigid rotation by `angle` about the origin.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let center = [c * self.center[0] - s * self.center[1], s * self.center[0] + c * self.center[1]];
        let mut cos = Vec::with_capacity(self.degree());
        let mut sin = Vec::with_capacity(self.degree());
        for (k, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let (sk, ck) = ((k + 1) as f64 * angle).sin_cos();
            cos.push(a * ck - b * sk);
            sin.push(a * sk + b * ck);
        }
        BoundaryCurve { center, a0: self.a0, cos, sin }
    }
}

/// Geometry of a curve sampled on `N` uniform angular nodes.
#[derive(Clone, Debug)]
pub struct CurveSamples {
    pub theta: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    /// `dx/dθ`.
    pub tangent: Vec<[f64; 2]>,
    /// Unit normal pointing into the enclosed region.
    pub normal: Vec<[f64; 2]>,
    /// `|dx/dθ|`.
    pub speed: Vec<f64>,
    /// Curvature with `H = -1/r` on circles.
    pub curvature: Vec<f64>,
    /// `R / sqrt(R² + R'²)`; converts `dR/dt` into normal speed.
    pub metric: Vec<f64>,
    pub radius: Vec<f64>,
    pub radius_derivative: Vec<f64>,
    pub center: [f64; 2],
}

impl CurveSamples {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.len() as f64
    }

    /// Trapezoid weights `s_i · 2π/N`.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.dtheta();
        self.speed.iter().map(|s| s * h).collect()
    }

    pub fn length(&self) -> f64 {
        self.speed.iter().sum::<f64>() * self.dtheta()
    }

    /// Smallest distance between a node of `self` and a node of `other`.
    pub fn min_separation(&self, other: &CurveSamples) -> f64 {
        let mut best = f64::INFINITY;
        for p in &self.points {
            for q in &other.points {
                best = best.min((p[0] - q[0]).hypot(p[1] - q[1]));
            }
        }
        best
    }

    /// Largest node spacing along the curve.
    pub fn max_spacing(&self) -> f64 {
        self.speed.iter().fold(0.0_f64, |m, &s| m.max(s)) * self.dtheta()
    }
}

/// Samples position, normal, speed, curvature and metric factor on `n` nodes.
/// Requires `n` even and `n >= 4K`.
pub fn sample_geometry(curve: &BoundaryCurve, n: usize) -> Result<CurveSamples> {
    let k = curve.degree();
    if n < 4 * k || n < 4 || n % 2 != 0 {
        return Err(Error::ResolutionTooLow { nodes: n, degree: k });
    }
    let r = spectral::synthesize(curve.a0, &curve.cos, &curve.sin, n, 0);
    let dr = spectral::synthesize(curve.a0, &curve.cos, &curve.sin, n, 1);
    let ddr = spectral::synthesize(curve.a0, &curve.cos, &curve.sin, n, 2);
    let theta = spectral::nodes(n);
    let c = curve.center;

    let mut points = Vec::with_capacity(n);
    let mut tangent = Vec::with_capacity(n);
    let mut normal = Vec::with_capacity(n);
    let mut speed = Vec::with_capacity(n);
    let mut curvature = Vec::with_capacity(n);
    let mut metric = Vec::with_capacity(n);
    for i in 0..n {
        let (st, ct) = theta[i].sin_cos();
        let (ri, dri, ddri) = (r[i], dr[i], ddr[i]);
        if ri <= 0.0 {
            return Err(Error::NonStarShaped { theta: theta[i], radius: ri });
        }
        points.push([c[0] + ri * ct, c[1] + ri * st]);
        // x_θ = R' e_r + R e_θ
        let tx = dri * ct - ri * st;
        let ty = dri * st + ri * ct;
        tangent.push([tx, ty]);
        let s = ri.hypot(dri);
        speed.push(s);
        // outward normal of a CCW curve is (ty, -tx)/s; store the inward one
        normal.push([-ty / s, tx / s]);
        let kappa = (ri * ri + 2.0 * dri * dri - ri * ddri) / (s * s * s);
        curvature.push(-kappa);
        metric.push(ri / s);
    }
    Ok(CurveSamples {
        theta,
        points,
        tangent,
        normal,
        speed,
        curvature,
        metric,
        radius: r,
        radius_derivative: dr,
        center: c,
    })
}

/// Metric factor `g = R/sqrt(R² + R'²)` on the sampled nodes; the normal
/// velocity of a polar graph moving with `dR/dt` is `-g dR/dt` along `ν`.
pub fn metric_factor(samples: &CurveSamples) -> BoundaryField {
    BoundaryField(samples.metric.clone())
}

/// Periodic trapezoid rule `Σ f_i s_i 2π/N`.
pub fn integrate_boundary(samples: &CurveSamples, f: &[f64]) -> Result<f64> {
    if f.len() != samples.len() {
        return Err(Error::GridMismatch { expected: samples.len(), got: f.len() });
    }
    let h = samples.dtheta();
    Ok(f.iter().zip(&samples.speed).map(|(v, s)| v * s).sum::<f64>() * h)
}
