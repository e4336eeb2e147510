//! Second-kind boundary integral solver for the Laplacian on the annulus
//! between a container curve and an inner free-boundary curve.
//!
//! The potential is represented as
//!
//! ```text
//! u(x) = D_out[μ_out](x) + D_in[μ_in](x) + α log|x - c_in|,   ∫_in μ_in ds = 0,
//! ```
//!
//! where `D` is the double layer with the outward normal of each curve and
//! `c_in` is the inner curve's center. Both curves are discretized with the
//! periodic trapezoid rule (Nyström), which is spectrally accurate here because
//! the 2-D double-layer kernel is smooth on smooth curves.
//!
//! Normal derivatives on the boundary come from the complex representation
//! `D[μ] = Re Φ`, `Φ(z) = (1/2πi)∮ μ(ζ)/(ζ-z) dζ`. Integrating by parts,
//! `Φ'(z)` is the Cauchy integral of `dμ/dζ`, whose boundary limit is evaluated
//! with singularity subtraction. No off-surface differencing is involved.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Dyn, LU, SVD};
use num_complex::Complex64;

use crate::curve::{sample_geometry, BoundaryCurve, BoundaryField, CurveSamples};
use crate::error::{Error, Result};
use crate::spectral;

/// Minimum node-to-node distance between the two curves.
pub const MIN_SEPARATION: f64 = 0.02;

/// Normalized singular value below which the Robin operator counts as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-10;

/// Off-boundary evaluation requires this many node spacings of clearance.
pub const EVAL_GUARD_SPACINGS: f64 = 5.0;

/// Container `∂Ω` (outer) and free boundary `∂A` (inner) with their sampled geometry.
#[derive(Clone, Debug)]
pub struct AnnularDomain {
    outer: BoundaryCurve,
    inner: BoundaryCurve,
    outer_samples: CurveSamples,
    inner_samples: CurveSamples,
}

impl AnnularDomain {
    pub fn new(outer: BoundaryCurve, inner: BoundaryCurve, n_outer: usize, n_inner: usize) -> Result<Self> {
        let outer_samples = sample_geometry(&outer, n_outer)?;
        let inner_samples = sample_geometry(&inner, n_inner)?;
        if inner_samples.points.iter().any(|p| !outer.contains(*p)) {
            return Err(Error::BoundaryTooClose { separation: 0.0 });
        }
        let separation = inner_samples.min_separation(&outer_samples);
        if separation <= MIN_SEPARATION {
            return Err(Error::BoundaryTooClose { separation });
        }
        Ok(AnnularDomain { outer, inner, outer_samples, inner_samples })
    }

    /// Same container and node counts, new inner curve.
    pub fn with_inner(&self, inner: BoundaryCurve) -> Result<Self> {
        let inner_samples = sample_geometry(&inner, self.inner_samples.len())?;
        if inner_samples.points.iter().any(|p| !self.outer.contains(*p)) {
            return Err(Error::BoundaryTooClose { separation: 0.0 });
        }
        let separation = inner_samples.min_separation(&self.outer_samples);
        if separation <= MIN_SEPARATION {
            return Err(Error::BoundaryTooClose { separation });
        }
        Ok(AnnularDomain {
            outer: self.outer.clone(),
            inner,
            outer_samples: self.outer_samples.clone(),
            inner_samples,
        })
    }

    pub fn outer(&self) -> &BoundaryCurve {
        &self.outer
    }

    pub fn inner(&self) -> &BoundaryCurve {
        &self.inner
    }

    pub fn outer_samples(&self) -> &CurveSamples {
        &self.outer_samples
    }

    pub fn inner_samples(&self) -> &CurveSamples {
        &self.inner_samples
    }

    fn n_total(&self) -> usize {
        self.outer_samples.len() + self.inner_samples.len() + 1
    }

    fn log_center(&self) -> [f64; 2] {
        self.inner.center()
    }

    /// Assembles and factorizes the Dirichlet system.
    pub fn factorize(&self) -> Result<DirichletSystem> {
        DirichletSystem::assemble(self)
    }

    /// Whether `x` lies strictly between the two curves.
    pub fn in_annulus(&self, x: [f64; 2]) -> bool {
        self.outer.contains(x) && !self.inner.contains(x)
    }
}

/// `(1/2π) n_y·(y - x)/|y - x|²` with `n_y` the outward normal of the source curve.
fn double_layer_kernel(x: [f64; 2], y: [f64; 2], inward_normal_y: [f64; 2]) -> f64 {
    let dx = y[0] - x[0];
    let dy = y[1] - x[1];
    let r2 = dx * dx + dy * dy;
    -(inward_normal_y[0] * dx + inward_normal_y[1] * dy) / (2.0 * PI * r2)
}

fn to_c(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

/// Factorized Nyström system for one annular domain, plus the linear maps from
/// unknowns `(μ_out, μ_in, α)` to normal derivatives on each curve.
pub struct DirichletSystem {
    n_outer: usize,
    n_inner: usize,
    matrix: DMatrix<f64>,
    lu: LU<f64, Dyn, Dyn>,
    /// Rows give `∂u/∂ν` on inner nodes (`ν` into the inner region).
    inner_normal_op: DMatrix<f64>,
    /// Rows give `∂u/∂n` on outer nodes (`n` out of the container).
    outer_normal_op: DMatrix<f64>,
}

impl std::fmt::Debug for DirichletSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirichletSystem")
            .field("n_outer", &self.n_outer)
            .field("n_inner", &self.n_inner)
            .finish()
    }
}

impl DirichletSystem {
    fn assemble(domain: &AnnularDomain) -> Result<Self> {
        let so = &domain.outer_samples;
        let si = &domain.inner_samples;
        let (no, ni) = (so.len(), si.len());
        let n = domain.n_total();
        let c = domain.log_center();
        let wo = so.weights();
        let wi = si.weights();

        let mut a = DMatrix::<f64>::zeros(n, n);
        // rows on the outer curve: interior limit, +½μ
        for i in 0..no {
            let x = so.points[i];
            for j in 0..no {
                a[(i, j)] = if i == j {
                    0.5 - so.curvature[j] / (4.0 * PI) * wo[j]
                } else {
                    double_layer_kernel(x, so.points[j], so.normal[j]) * wo[j]
                };
            }
            for j in 0..ni {
                a[(i, no + j)] = double_layer_kernel(x, si.points[j], si.normal[j]) * wi[j];
            }
            a[(i, n - 1)] = (x[0] - c[0]).hypot(x[1] - c[1]).ln();
        }
        // rows on the inner curve: exterior limit, -½μ
        for i in 0..ni {
            let x = si.points[i];
            for j in 0..no {
                a[(no + i, j)] = double_layer_kernel(x, so.points[j], so.normal[j]) * wo[j];
            }
            for j in 0..ni {
                a[(no + i, no + j)] = if i == j {
                    -0.5 - si.curvature[j] / (4.0 * PI) * wi[j]
                } else {
                    double_layer_kernel(x, si.points[j], si.normal[j]) * wi[j]
                };
            }
            a[(no + i, n - 1)] = (x[0] - c[0]).hypot(x[1] - c[1]).ln();
        }
        let length: f64 = wi.iter().sum();
        for j in 0..ni {
            a[(n - 1, no + j)] = wi[j] / length;
        }

        let inner_normal_op = normal_derivative_operator(domain, Side::Inner);
        let outer_normal_op = normal_derivative_operator(domain, Side::Outer);
        let lu = a.clone().lu();
        if !lu.is_invertible() {
            return Err(Error::SingularSystem);
        }
        Ok(DirichletSystem { n_outer: no, n_inner: ni, matrix: a, lu, inner_normal_op, outer_normal_op })
    }

    pub fn n_outer(&self) -> usize {
        self.n_outer
    }

    pub fn n_inner(&self) -> usize {
        self.n_inner
    }

    /// Solves for layer densities given Dirichlet data on both curves.
    pub fn solve(&self, outer_data: &[f64], inner_data: &[f64]) -> Result<(LayerDensities, f64)> {
        if outer_data.len() != self.n_outer {
            return Err(Error::GridMismatch { expected: self.n_outer, got: outer_data.len() });
        }
        if inner_data.len() != self.n_inner {
            return Err(Error::GridMismatch { expected: self.n_inner, got: inner_data.len() });
        }
        let mut b = DVector::<f64>::zeros(self.n_outer + self.n_inner + 1);
        for (i, v) in outer_data.iter().enumerate() {
            b[i] = *v;
        }
        for (i, v) in inner_data.iter().enumerate() {
            b[self.n_outer + i] = *v;
        }
        let x = self.lu.solve(&b).ok_or(Error::SingularSystem)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem);
        }
        let residual = (&self.matrix * &x - &b).amax();
        let scale = b.amax().max(1.0);
        if residual > 1e-8 * scale {
            return Err(Error::SingularSystem);
        }
        Ok((LayerDensities::from_vector(&x, self.n_outer, self.n_inner), residual))
    }

    pub fn inner_normal_derivative(&self, densities: &LayerDensities) -> BoundaryField {
        BoundaryField((&self.inner_normal_op * densities.to_vector()).as_slice().to_vec())
    }

    pub fn outer_normal_derivative(&self, densities: &LayerDensities) -> BoundaryField {
        BoundaryField((&self.outer_normal_op * densities.to_vector()).as_slice().to_vec())
    }

    /// Dirichlet-to-Neumann matrix on the inner curve for data vanishing on
    /// the container: maps `p|∂A` to `∂p/∂ν|∂A`.
    pub fn inner_dtn(&self) -> DMatrix<f64> {
        let n = self.n_outer + self.n_inner + 1;
        let mut rhs = DMatrix::<f64>::zeros(n, self.n_inner);
        for j in 0..self.n_inner {
            rhs[(self.n_outer + j, j)] = 1.0;
        }
        let x = self.lu.solve(&rhs).expect("factorization checked at assembly");
        &self.inner_normal_op * x
    }
}

#[derive(Clone, Copy)]
enum Side {
    Outer,
    Inner,
}

/// Real matrix mapping `(μ_out, μ_in, α)` to the normal derivative on one curve.
fn normal_derivative_operator(domain: &AnnularDomain, side: Side) -> DMatrix<f64> {
    let (target, other, interior) = match side {
        Side::Outer => (&domain.outer_samples, &domain.inner_samples, true),
        Side::Inner => (&domain.inner_samples, &domain.outer_samples, false),
    };
    let nt = target.len();
    let nr = other.len();
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);

    // direction of differentiation: ν (into A) on the inner curve, outward n on the outer
    let dir: Vec<Complex64> = target
        .normal
        .iter()
        .map(|v| match side {
            Side::Inner => to_c(*v),
            Side::Outer => -to_c(*v),
        })
        .collect();

    let zt: Vec<Complex64> = target.points.iter().map(|p| to_c(*p)).collect();
    let dzt: Vec<Complex64> = target.tangent.iter().map(|p| to_c(*p)).collect();
    let ht = target.dtheta();

    // self part: (S - diag(rowsum) + (h/2πi) D + ε I) diag(1/ζ_θ) D
    let d = spectral::derivative_matrix(nt);
    let mut s = DMatrix::<Complex64>::zeros(nt, nt);
    for i in 0..nt {
        for j in 0..nt {
            if i != j {
                s[(i, j)] = dzt[j] * ht / (two_pi_i * (zt[j] - zt[i]));
            }
        }
    }
    let dc = d.map(|v| Complex64::new(v, 0.0));
    let mut left = dc.clone() * Complex64::new(ht, 0.0) / two_pi_i;
    for i in 0..nt {
        let rowsum: Complex64 = s.row(i).iter().sum();
        for j in 0..nt {
            left[(i, j)] += s[(i, j)];
        }
        left[(i, i)] -= rowsum;
        if interior {
            left[(i, i)] += Complex64::new(1.0, 0.0);
        }
    }
    let mut right = dc;
    for i in 0..nt {
        let inv = Complex64::new(1.0, 0.0) / dzt[i];
        for j in 0..nt {
            right[(i, j)] *= inv;
        }
    }
    let self_op = left * right;

    // cross part from the other curve: (h/2πi) ζ_θ,j / (ζ_j - z_i)²
    let zr: Vec<Complex64> = other.points.iter().map(|p| to_c(*p)).collect();
    let dzr: Vec<Complex64> = other.tangent.iter().map(|p| to_c(*p)).collect();
    let hr = other.dtheta();

    let (no, ni) = (domain.outer_samples.len(), domain.inner_samples.len());
    let (self_offset, other_offset) = match side {
        Side::Outer => (0, no),
        Side::Inner => (no, 0),
    };
    let c = to_c(domain.log_center());
    let mut op = DMatrix::<f64>::zeros(nt, no + ni + 1);
    for i in 0..nt {
        for j in 0..nt {
            op[(i, self_offset + j)] = (dir[i] * self_op[(i, j)]).re;
        }
        for j in 0..nr {
            let diff = zr[j] - zt[i];
            let k = dzr[j] * hr / (two_pi_i * diff * diff);
            op[(i, other_offset + j)] = (dir[i] * k).re;
        }
        op[(i, no + ni)] = (dir[i] / (zt[i] - c)).re;
    }
    op
}

/// Layer densities and log-source strength.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerDensities {
    pub outer: Vec<f64>,
    pub inner: Vec<f64>,
    pub log_strength: f64,
}

impl LayerDensities {
    fn from_vector(x: &DVector<f64>, no: usize, ni: usize) -> Self {
        LayerDensities {
            outer: x.rows(0, no).iter().copied().collect(),
            inner: x.rows(no, ni).iter().copied().collect(),
            log_strength: x[no + ni],
        }
    }

    fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.outer.len() + self.inner.len() + 1,
            self.outer.iter().chain(&self.inner).copied().chain(std::iter::once(self.log_strength)),
        )
    }
}

/// Harmonic function on the annulus with its boundary traces.
#[derive(Clone, Debug)]
pub struct PotentialSolution {
    domain: Arc<AnnularDomain>,
    system: Arc<DirichletSystem>,
    densities: LayerDensities,
    inner_normal_derivative: BoundaryField,
    outer_normal_derivative: BoundaryField,
    trace_residual: f64,
}

impl PotentialSolution {
    pub fn domain(&self) -> &AnnularDomain {
        &self.domain
    }

    pub fn system(&self) -> &Arc<DirichletSystem> {
        &self.system
    }

    pub fn densities(&self) -> &LayerDensities {
        &self.densities
    }

    /// Max residual of the discrete Dirichlet system.
    pub fn trace_residual(&self) -> f64 {
        self.trace_residual
    }

    /// `∂u/∂ν` on the inner nodes, `ν` pointing into the inner region.
    pub fn inner_normal_derivative(&self) -> &BoundaryField {
        &self.inner_normal_derivative
    }

    /// `∂u/∂n` on the container nodes, `n` the outward normal of the container.
    pub fn outer_normal_derivative(&self) -> &BoundaryField {
        &self.outer_normal_derivative
    }

    /// Layer-potential value at one point, without the near-boundary guard.
    fn value_unchecked(&self, x: [f64; 2]) -> f64 {
        let d = &self.domain;
        let mut u = 0.0;
        for (s, mu) in [(&d.outer_samples, &self.densities.outer), (&d.inner_samples, &self.densities.inner)] {
            let h = s.dtheta();
            for j in 0..s.len() {
                u += double_layer_kernel(x, s.points[j], s.normal[j]) * s.speed[j] * h * mu[j];
            }
        }
        let c = d.log_center();
        u + self.densities.log_strength * (x[0] - c[0]).hypot(x[1] - c[1]).ln()
    }
}

/// Solves the Dirichlet problem with given data on both curves.
pub fn solve_dirichlet(domain: &AnnularDomain, outer_data: &[f64], inner_data: &[f64]) -> Result<PotentialSolution> {
    let system = Arc::new(domain.factorize()?);
    solve_with_system(Arc::new(domain.clone()), system, outer_data, inner_data)
}

fn solve_with_system(
    domain: Arc<AnnularDomain>,
    system: Arc<DirichletSystem>,
    outer_data: &[f64],
    inner_data: &[f64],
) -> Result<PotentialSolution> {
    let (densities, trace_residual) = system.solve(outer_data, inner_data)?;
    let inner_normal_derivative = system.inner_normal_derivative(&densities);
    let outer_normal_derivative = system.outer_normal_derivative(&densities);
    Ok(PotentialSolution {
        domain,
        system,
        densities,
        inner_normal_derivative,
        outer_normal_derivative,
        trace_residual,
    })
}

/// Capacitary potential: `u = 0` on the container, `u = 1` on the inner curve.
pub fn solve_capacitary(domain: &AnnularDomain) -> Result<PotentialSolution> {
    let no = domain.outer_samples.len();
    let ni = domain.inner_samples.len();
    solve_dirichlet(domain, &vec![0.0; no], &vec![1.0; ni])
}

/// `∂u/∂ν` on the free boundary.
pub fn normal_derivative_inner(sol: &PotentialSolution) -> BoundaryField {
    sol.inner_normal_derivative.clone()
}

/// Evaluates `u` at interior points; each must clear both curves by
/// [`EVAL_GUARD_SPACINGS`] node spacings.
pub fn evaluate_potential(sol: &PotentialSolution, points: &[[f64; 2]]) -> Result<Vec<f64>> {
    let d = &sol.domain;
    let guard_out = EVAL_GUARD_SPACINGS * d.outer_samples.max_spacing();
    let guard_in = EVAL_GUARD_SPACINGS * d.inner_samples.max_spacing();
    points
        .iter()
        .map(|&x| {
            if !d.in_annulus(x) {
                return Err(Error::InvalidInput(format!("point ({:.4}, {:.4}) is outside the annulus", x[0], x[1])));
            }
            let near = |s: &CurveSamples, guard: f64| s.points.iter().any(|p| (p[0] - x[0]).hypot(p[1] - x[1]) < guard);
            if near(&d.outer_samples, guard_out) || near(&d.inner_samples, guard_in) {
                return Err(Error::TooCloseToBoundary { x: x[0], y: x[1] });
            }
            Ok(sol.value_unchecked(x))
        })
        .collect()
}

/// Linear Robin problem on the inner curve: `∂p/∂ν + β p = φ`, `p = 0` on the
/// container. Holds the dense operator `Λ + diag β` and its SVD.
pub struct RobinSystem {
    matrix: DMatrix<f64>,
    svd: SVD<f64, Dyn, Dyn>,
    margin: f64,
}

impl std::fmt::Debug for RobinSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RobinSystem").field("margin", &self.margin).finish()
    }
}

impl RobinSystem {
    pub fn new(dtn: &DMatrix<f64>, coeff: &[f64]) -> Result<Self> {
        let n = dtn.nrows();
        if coeff.len() != n {
            return Err(Error::GridMismatch { expected: n, got: coeff.len() });
        }
        let mut matrix = dtn.clone();
        for i in 0..n {
            matrix[(i, i)] += coeff[i];
        }
        let svd = matrix.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let margin = if smax > 0.0 { smin / smax } else { 0.0 };
        Ok(RobinSystem { matrix, svd, margin })
    }

    /// Smallest singular value over the largest.
    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Unique solution; fails when the operator is degenerate.
    pub fn solve(&self, rhs: &[f64]) -> Result<BoundaryField> {
        if self.margin < DEGENERACY_THRESHOLD {
            return Err(Error::DegenerateOperator { margin: self.margin });
        }
        Ok(self.solve_truncated(rhs, 0.0))
    }

    /// Minimum-norm least-squares solution, discarding singular values below
    /// `rel_cutoff · σ_max`.
    pub fn solve_truncated(&self, rhs: &[f64], rel_cutoff: f64) -> BoundaryField {
        let b = DVector::from_column_slice(rhs);
        let eps = rel_cutoff * self.svd.singular_values.max();
        let u = self.svd.u.as_ref().expect("computed with U");
        let vt = self.svd.v_t.as_ref().expect("computed with V^T");
        let mut coeffs = u.transpose() * b;
        for (c, s) in coeffs.iter_mut().zip(self.svd.singular_values.iter()) {
            *c = if *s > eps && *s > 0.0 { *c / s } else { 0.0 };
        }
        BoundaryField((vt.transpose() * coeffs).as_slice().to_vec())
    }

    /// Sup-norm of `(Λ + β)p - φ`.
    pub fn residual(&self, p: &[f64], rhs: &[f64]) -> f64 {
        let pv = DVector::from_column_slice(p);
        let r = &self.matrix * pv - DVector::from_column_slice(rhs);
        r.amax()
    }
}

/// Solves the Robin problem on `domain` for coefficient `β` and data `φ`,
/// returning the trace `p|∂A`.
pub fn solve_robin(domain: &AnnularDomain, robin_coeff: &[f64], rhs: &[f64]) -> Result<BoundaryField> {
    let system = domain.factorize()?;
    let robin = RobinSystem::new(&system.inner_dtn(), robin_coeff)?;
    if rhs.len() != robin_coeff.len() {
        return Err(Error::GridMismatch { expected: robin_coeff.len(), got: rhs.len() });
    }
    robin.solve(rhs)
}

/// Green's function of the unit disk for `-Δ`.
pub fn disk_green(x: [f64; 2], y: [f64; 2]) -> f64 {
    let ry2 = y[0] * y[0] + y[1] * y[1];
    let ys = [y[0] / ry2, y[1] / ry2];
    let far = (x[0] - ys[0]).hypot(x[1] - ys[1]) * ry2.sqrt();
    let near = (x[0] - y[0]).hypot(x[1] - y[1]);
    (far.ln() - near.ln()) / (2.0 * PI)
}

/// Probe points midway between the curves along 16 rays from the inner center.
fn green_probes(domain: &AnnularDomain) -> Vec<[f64; 2]> {
    let c = domain.inner.center();
    (0..16)
        .map(|k| {
            let a = 2.0 * PI * (k as f64 + 0.25) / 16.0;
            let e = [a.cos(), a.sin()];
            let r_in = domain.inner.radius(a);
            // distance along the ray to the unit circle: |c + s e| = 1
            let b = c[0] * e[0] + c[1] * e[1];
            let cc = c[0] * c[0] + c[1] * c[1] - 1.0;
            let s_out = -b + (b * b - cc).sqrt();
            let s = 0.5 * (r_in + s_out);
            [c[0] + s * e[0], c[1] + s * e[1]]
        })
        .collect()
}

/// Compares the BIE potential against `∫_∂A Q(y) G(x,y) dσ(y)` with the
/// unit-disk Green's function. Small only when `Q = ∂u/∂ν`.
pub fn greens_check(sol: &PotentialSolution, q: &[f64]) -> Result<f64> {
    let d = &sol.domain;
    if !d.outer.is_unit_circle(1e-14) {
        return Err(Error::OuterNotDisk);
    }
    let si = &d.inner_samples;
    if q.len() != si.len() {
        return Err(Error::GridMismatch { expected: si.len(), got: q.len() });
    }
    let probes = green_probes(d);
    let bie = evaluate_potential(sol, &probes)?;
    let w = si.weights();
    let mut worst = 0.0_f64;
    for (x, u) in probes.iter().zip(bie) {
        let green: f64 = (0..si.len()).map(|j| q[j] * disk_green(*x, si.points[j]) * w[j]).sum();
        worst = worst.max((u - green).abs());
    }
    Ok(worst)
}
