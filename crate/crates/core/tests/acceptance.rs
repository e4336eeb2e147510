//! Acceptance criteria, one line per criterion. Exits nonzero if any fails.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use bernoulli_core::bie::{solve_capacitary, AnnularDomain};
use bernoulli_core::classify::{classify, Kind};
use bernoulli_core::curve::BoundaryCurve;
use bernoulli_core::error::Error;
use bernoulli_core::flow::{branch_sweep, run_flow, FlowCase, FlowOptions, RowStatus, SweepOptions, Termination};
use bernoulli_core::moments::{harmonic_test_basis, moments, quadrature_residual};
use bernoulli_core::operator::{apply_inverse, apply_linearization, eval_f, newton_correct, state_for, NewtonOptions, SolutionState};
use bernoulli_core::radial::{critical, radial_branch_roots, radial_linearized, radial_q};
use bernoulli_core::schedule::{AffineSchedule, QSchedule};
use bernoulli_core::spectral;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn unit() -> BoundaryCurve {
    BoundaryCurve::unit_circle()
}

fn circle(r: f64) -> BoundaryCurve {
    BoundaryCurve::circle([0.0, 0.0], r).unwrap()
}

fn solved(seed: &BoundaryCurve, q: Arc<dyn QSchedule>) -> Result<SolutionState, String> {
    let s = state_for(&unit(), seed, 128, 128, q, 0.0).map_err(|e| e.to_string())?;
    Ok(newton_correct(&s, &NewtonOptions::default()).map_err(|e| e.to_string())?.state)
}

fn radial_solution(r: f64) -> Result<SolutionState, String> {
    solved(&circle(r), Arc::new(AffineSchedule::constant(radial_q(r, 2).unwrap())))
}

fn budget(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("runtime {elapsed:.2?} exceeds {limit:?}"))
}

fn c1_radial_dirichlet() -> Check {
    let start = Instant::now();
    let domain = AnnularDomain::new(unit(), circle(0.5), 128, 128).map_err(|e| e.to_string())?;
    let sol = solve_capacitary(&domain).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let exact = radial_q(0.5, 2).unwrap();
    let err = sol.inner_normal_derivative().iter().map(|v| (v - exact).abs()).fold(0.0, f64::max);
    ensure(err < 1e-8, || format!("max node error {err:.3e}"))?;
    ensure((exact - 2.885390).abs() < 1e-6, || format!("oracle {exact}"))?;
    budget(elapsed, Duration::from_secs(1))?;
    Ok(format!("max error {err:.2e}, {elapsed:.2?}"))
}

fn c2_critical_constants() -> Check {
    let (r2, q2) = critical(2).map_err(|e| e.to_string())?;
    let (r3, q3) = critical(3).map_err(|e| e.to_string())?;
    ensure((r2 - (-1.0f64).exp()).abs() < 1e-12 && (q2 - std::f64::consts::E).abs() < 1e-12, || format!("n=2: ({r2}, {q2})"))?;
    ensure((r3 - 0.5).abs() < 1e-12 && (q3 - 4.0).abs() < 1e-12, || format!("n=3: ({r3}, {q3})"))?;
    Ok(format!("(e^-1, e) and (0.5, 4)"))
}

fn c3_two_branches() -> Check {
    let start = Instant::now();
    let seeds = [circle(0.15), circle(0.6)];
    let constant = |q: f64| -> Arc<dyn QSchedule> { Arc::new(AffineSchedule::constant(q)) };
    let rows = branch_sweep(&unit(), &[3.0, 2.0], &seeds, constant, &SweepOptions::default());
    let elapsed = start.elapsed();
    let (lo, hi) = radial_branch_roots(3.0, 2).unwrap().unwrap();
    let mut detail = Vec::new();
    for row in &rows {
        if row.q == 2.0 {
            ensure(row.status == RowStatus::NoConvergence, || format!("Q=2 seed {}: {:?}", row.seed, row.status))?;
            continue;
        }
        let (target, kind) = if row.seed == 0 { (lo.r, Kind::Hyperbolic) } else { (hi.r, Kind::Elliptic) };
        let r = row.equivalent_radius.ok_or_else(|| format!("Q=3 seed {} did not converge", row.seed))?;
        ensure((r - target).abs() < 1e-6, || format!("radius {r} vs {target}"))?;
        ensure(row.kind == Some(kind), || format!("kind {:?} for r = {r}", row.kind))?;
        detail.push(format!("{r:.6} {:?}", kind));
    }
    budget(elapsed, Duration::from_secs(30))?;
    Ok(format!("{}; Q=2 NoConvergence; {elapsed:.2?}", detail.join(", ")))
}

fn c4_classification() -> Check {
    let mut detail = Vec::new();
    for (r, kind) in [(0.5, Kind::Elliptic), (0.2, Kind::Hyperbolic)] {
        let rec = classify(&radial_solution(r)?, None).map_err(|e| e.to_string())?;
        let (_, exact) = radial_linearized(r, 1.0).unwrap();
        ensure(rec.kind == kind, || format!("r={r}: {:?}", rec.kind))?;
        ensure((rec.integral_p - exact).abs() < 1e-6, || format!("r={r}: integral_p {} vs {exact}", rec.integral_p))?;
        ensure(rec.monotone && !rec.degenerate && rec.nondegeneracy_margin > 1e-5, || format!("r={r}: {rec:?}"))?;
        detail.push(format!("{:.6}", rec.integral_p));
    }
    let (r_star, _) = critical(2).unwrap();
    for dr in [-1e-4, 0.0, 1e-4] {
        let rec = classify(&radial_solution(r_star + dr)?, None).map_err(|e| e.to_string())?;
        ensure(rec.kind == Kind::Parabolic, || format!("r* + {dr:e}: {:?}", rec.kind))?;
        if dr == 0.0 {
            ensure(rec.degenerate, || "degenerate flag not set at r*".to_string())?;
        }
    }
    Ok(format!("integral_p {}; parabolic at r* and r*±1e-4", detail.join(" / ")))
}

fn c5_hyperbolic_flow() -> Check {
    let (lo, _) = radial_branch_roots(3.0, 2).unwrap().unwrap();
    let start = Instant::now();
    let s = solved(&circle(lo.r), Arc::new(AffineSchedule::linear(3.0, 1.0)))?;
    let opts = FlowOptions { case: FlowCase::A, dt0: 0.01, ..Default::default() };
    let traj = run_flow(&s, 0.5, &opts).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(traj.termination == Termination::Completed, || format!("{:?}", traj.termination))?;
    let target = radial_branch_roots(3.5, 2).unwrap().unwrap().0.r;
    let r = traj.last().inner().equivalent_radius();
    ensure((r - target).abs() < 1e-4, || format!("final radius {r} vs {target}"))?;
    ensure(
        traj.states.iter().all(|s| s.classification().is_some_and(|c| c.kind == Kind::Hyperbolic)),
        || "non-hyperbolic state".into(),
    )?;
    let max_res = traj.diagnostics.iter().map(|d| d.residual).fold(0.0, f64::max);
    ensure(max_res < 1e-8, || format!("residual {max_res:.2e}"))?;
    ensure(traj.max_drift() < 1e-5, || format!("drift {:.2e}", traj.max_drift()))?;
    budget(elapsed, Duration::from_secs(120))?;
    Ok(format!(
        "r(0.5) = {r:.6} (oracle {target:.6}), {} steps, residual {max_res:.1e}, drift {:.1e}, {elapsed:.1?}",
        traj.diagnostics.len(),
        traj.max_drift()
    ))
}

fn c6_elliptic_flow() -> Check {
    let (_, hi) = radial_branch_roots(3.0, 2).unwrap().unwrap();
    let s = solved(&circle(hi.r), Arc::new(AffineSchedule::linear(3.0, -1.0)))?;
    let traj = run_flow(&s, 0.2, &FlowOptions { case: FlowCase::B, ..Default::default() }).map_err(|e| e.to_string())?;
    ensure(traj.termination == Termination::Completed, || format!("{:?}", traj.termination))?;
    let target = radial_branch_roots(2.8, 2).unwrap().unwrap().1.r;
    let r = traj.last().inner().equivalent_radius();
    ensure((r - target).abs() < 1e-4, || format!("final radius {r} vs {target}"))?;
    let radii: Vec<f64> = traj.states.iter().map(|s| s.inner().equivalent_radius()).collect();
    ensure(radii.windows(2).all(|w| w[1] < w[0]), || "radius not strictly decreasing".into())?;
    Ok(format!("r(0.2) = {r:.6} (oracle {target:.6}), monotone over {} steps", traj.diagnostics.len()))
}

fn c7_one_sidedness() -> Check {
    let (lo, _) = radial_branch_roots(3.0, 2).unwrap().unwrap();
    let s = solved(&circle(lo.r), Arc::new(AffineSchedule::linear(3.0, -1.0)))?;
    let traj = run_flow(&s, 0.5, &FlowOptions { case: FlowCase::A, ..Default::default() }).map_err(|e| e.to_string())?;
    ensure(matches!(traj.termination, Termination::Failed(Error::SignMismatch { .. })), || format!("{:?}", traj.termination))?;
    ensure(traj.states.len() == 1 && traj.diagnostics.is_empty(), || format!("{} accepted steps", traj.diagnostics.len()))?;
    Ok("SignMismatch before the first step".into())
}

fn c8_moment_certificates() -> Check {
    let basis = harmonic_test_basis(8);
    let tilt = |q0: f64| -> Arc<dyn QSchedule> { Arc::new(AffineSchedule::tilted(q0, 0.0, [0.02, 0.0])) };
    let mut states = Vec::new();
    for r in [0.2, 0.3, 0.5, 0.7] {
        states.push(radial_solution(r)?);
    }
    states.push(solved(&circle(0.22).with_degree(16).unwrap(), tilt(3.0))?);
    states.push(solved(&circle(0.54).with_degree(16).unwrap(), tilt(3.0))?);
    states.push(solved(&circle(0.3).with_degree(16).unwrap(), tilt(2.9))?);
    let mut worst: f64 = 0.0;
    for s in &states {
        let m = moments(s, &basis).map_err(|e| e.to_string())?;
        let dev0 = (m.values[0] + 2.0 * PI).abs();
        let dev = m.values[1..].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        ensure(dev0 < 1e-6 && dev < 1e-6, || format!("radius {:.4}: m_0 dev {dev0:.2e}, max m_kl {dev:.2e}", s.inner().a0()))?;
        worst = worst.max(dev0).max(dev);
    }
    let mut rng = StdRng::seed_from_u64(2024);
    let mut weakest = f64::INFINITY;
    for s in &states {
        for _ in 0..3 {
            let noise = |rng: &mut StdRng| (0..8).map(|_| rng.gen_range(-1e-3..1e-3)).collect::<Vec<f64>>();
            let (dc, ds) = (noise(&mut rng), noise(&mut rng));
            let curve = s.inner().with_degree(16).unwrap().perturbed(rng.gen_range(-1e-3..1e-3), &dc, &ds).unwrap();
            let bad = state_for(&unit(), &curve, 128, 128, s.schedule().clone(), 0.0).map_err(|e| e.to_string())?;
            let m = moments(&bad, &basis).map_err(|e| e.to_string())?;
            let viol = m.values.iter().enumerate().map(|(i, v)| if i == 0 { (v + 2.0 * PI).abs() } else { v.abs() }).fold(0.0, f64::max);
            ensure(viol > 1e-4, || format!("corrupted state violation only {viol:.2e}"))?;
            weakest = weakest.min(viol);
        }
    }
    Ok(format!("{} solutions within {worst:.1e}; corrupted states off by >= {weakest:.1e}", states.len()))
}

fn scaled(v: &[f64], h: f64) -> Vec<f64> {
    v.iter().map(|x| x * h).collect()
}

fn c9_linearization() -> Check {
    let n = 128;
    let inner = BoundaryCurve::circle([0.02, 0.01], 0.45).unwrap().perturbed(0.0, &[0.015, 0.01, 0.002], &[0.01, -0.005, 0.003]).unwrap();
    let schedule: Arc<dyn QSchedule> = Arc::new(AffineSchedule::tilted(3.2, 0.0, [0.08, 0.03]));
    let base = state_for(&unit(), &inner, n, n, schedule.clone(), 0.0).map_err(|e| e.to_string())?;
    let residual_at = |c: &BoundaryCurve| -> Result<Vec<f64>, String> {
        let d = AnnularDomain::new(unit(), c.clone(), n, n).map_err(|e| e.to_string())?;
        Ok(eval_f(&d, schedule.clone(), 0.0).map_err(|e| e.to_string())?.residual().0.clone())
    };
    let mut rng = StdRng::seed_from_u64(99);
    let mut min_order = f64::INFINITY;
    for _ in 0..5 {
        let k = inner.degree();
        let a0 = 4.0 * rng.gen_range(-1.0..1.0);
        let cos: Vec<f64> = (1..=k).map(|j| 4.0 * rng.gen_range(-1.0..1.0) / (j * j) as f64).collect();
        let sin: Vec<f64> = (1..=k).map(|j| 4.0 * rng.gen_range(-1.0..1.0) / (j * j) as f64).collect();
        let lin = apply_linearization(&base, &spectral::synthesize(a0, &cos, &sin, n, 0)).map_err(|e| e.to_string())?;
        let mut errs = Vec::new();
        for h in [1e-4, 5e-5] {
            let plus = residual_at(&inner.perturbed(h * a0, &scaled(&cos, h), &scaled(&sin, h)).unwrap())?;
            let minus = residual_at(&inner.perturbed(-h * a0, &scaled(&cos, -h), &scaled(&sin, -h)).unwrap())?;
            errs.push((0..n).map(|i| (lin[i] - (plus[i] - minus[i]) / (2.0 * h)).abs()).fold(0.0, f64::max));
        }
        let order = (errs[0] / errs[1]).log2();
        ensure(order >= 1.9, || format!("observed order {order:.3} (errors {errs:?})"))?;
        min_order = min_order.min(order);
    }

    let mut worst: f64 = 0.0;
    let states = [radial_solution(0.5)?, solved(&circle(0.22).with_degree(16).unwrap(), Arc::new(AffineSchedule::tilted(3.0, 0.0, [0.02, 0.0])))?];
    for s in &states {
        for _ in 0..3 {
            let cos: Vec<f64> = (1..=6).map(|j| rng.gen_range(-1.0..1.0) / (j * j) as f64).collect();
            let sin: Vec<f64> = (1..=6).map(|j| rng.gen_range(-1.0..1.0) / (j * j) as f64).collect();
            let phi = spectral::synthesize(rng.gen_range(-1.0..1.0), &cos, &sin, n, 0);
            let rho = apply_inverse(s, &phi).map_err(|e| e.to_string())?;
            let back = apply_linearization(s, &rho).map_err(|e| e.to_string())?;
            worst = worst.max((0..n).map(|i| (back[i] - phi[i]).abs()).fold(0.0, f64::max));
        }
    }
    ensure(worst < 1e-6, || format!("roundtrip error {worst:.2e}"))?;
    Ok(format!("min observed order {min_order:.3}; roundtrip error {worst:.1e}"))
}

fn c10_non_radial_flow() -> Check {
    let start = Instant::now();
    let schedule: Arc<dyn QSchedule> = Arc::new(AffineSchedule::tilted(3.0, 1.0, [0.02, 0.0]));
    let (lo, _) = radial_branch_roots(3.0, 2).unwrap().unwrap();
    let s = solved(&circle(lo.r).with_degree(16).unwrap(), schedule)?;
    let traj = run_flow(&s, 0.3, &FlowOptions { case: FlowCase::A, ..Default::default() }).map_err(|e| e.to_string())?;
    ensure(traj.termination == Termination::Completed, || format!("{:?}", traj.termination))?;
    let basis = harmonic_test_basis(8);
    let mut max_res: f64 = 0.0;
    let mut max_quad: f64 = 0.0;
    for st in &traj.states {
        ensure(st.classification().is_some_and(|c| c.kind == Kind::Hyperbolic), || format!("t = {}: not hyperbolic", st.time()))?;
        max_res = max_res.max(st.residual_norm());
        for h in &basis {
            max_quad = max_quad.max(quadrature_residual(st, h).map_err(|e| e.to_string())?.abs());
        }
    }
    let elapsed = start.elapsed();
    ensure(max_res < 1e-8, || format!("residual {max_res:.2e}"))?;
    ensure(max_quad < 1e-6, || format!("quadrature residual {max_quad:.2e}"))?;
    budget(elapsed, Duration::from_secs(300))?;
    Ok(format!(
        "{} states, residual {max_res:.1e}, quadrature {max_quad:.1e}, {elapsed:.1?}",
        traj.states.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("radial Dirichlet accuracy", c1_radial_dirichlet),
        ("critical constants", c2_critical_constants),
        ("two-branch reproduction", c3_two_branches),
        ("classification closed form", c4_classification),
        ("hyperbolic foliation flow", c5_hyperbolic_flow),
        ("elliptic foliation flow", c6_elliptic_flow),
        ("one-sidedness", c7_one_sidedness),
        ("moment certificates", c8_moment_certificates),
        ("linearization correctness", c9_linearization),
        ("non-radial regression", c10_non_radial_flow),
    ];
    let mut failed = 0;
    let mut out = std::io::stdout().lock();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let line = match check() {
            Ok(detail) => format!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                format!("criterion {:>2} FAIL  {name}: {why}", i + 1)
            }
        };
        writeln!(out, "{line}").unwrap();
        out.flush().unwrap();
    }
    writeln!(out, "acceptance: {} passed, {failed} failed", criteria.len() - failed).unwrap();
    if failed > 0 {
        std::process::exit(1);
    }
}
