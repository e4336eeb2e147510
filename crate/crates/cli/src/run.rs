//! Mode dispatch: build the inputs, run the solver, persist the artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use bernoulli_core::classify::{classify_in_place, Kind};
use bernoulli_core::curve::BoundaryCurve;
use bernoulli_core::flow::{branch_sweep, run_flow, SweepOptions, Termination};
use bernoulli_core::moments::{expected_flux, harmonic_test_basis, moments, quadrature_residual};
use bernoulli_core::operator::{newton_correct, state_for, NewtonOutcome, SolutionState};
use bernoulli_core::radial::radial_branch_roots;

use crate::artifacts::{
    diagnostics_header, prepare_run_dir, state_path, write_csv, write_json, Certificate, DiagnosticsRow,
    OracleRow, StateRecord, Summary, TerminationRecord, Timing, CONFIG_ECHO, DIAGNOSTICS, ORACLE, SUMMARY, TIMING,
};
use crate::config::{self, Mode, Prepared, RunConfig};
use crate::error::{CliError, Result};

#[derive(Clone, Debug)]
pub struct RunRequest {
    pub mode: Mode,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub verbose: bool,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    dir: &'a Path,
    verbose: bool,
}

impl Ctx<'_> {
    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("[bernoulli] {}", msg.as_ref());
        }
    }
}

/// Runs one configuration and returns the process exit code. A summary.json
/// is written whenever the run directory is known, including on failure.
pub fn execute(req: &RunRequest) -> i32 {
    let start = Instant::now();
    let loaded = config::load(&req.config);
    let dir = req.out.clone().or_else(|| loaded.as_ref().ok().and_then(|c| c.output.clone()));
    let Some(dir) = dir else {
        let e = loaded.err().unwrap_or_else(|| CliError::ConfigInvalid("no output directory: pass --out or set `output`".into()));
        eprintln!("error: {e}");
        return e.exit_code();
    };
    if let Err(e) = prepare_run_dir(&dir) {
        eprintln!("error: {e}");
        return e.exit_code();
    }

    let mut summary = Summary::new(req.mode.as_str());
    let result = loaded.and_then(|cfg| {
        write_json(&dir.join(CONFIG_ECHO), &cfg)?;
        let ctx = Ctx { cfg: &cfg, dir: &dir, verbose: req.verbose };
        run_mode(&ctx, req.mode, &mut summary)
    });
    let mut code = 0;
    if let Err(e) = &result {
        eprintln!("error: {e}");
        summary.fail(e);
        code = e.exit_code();
    }
    if let Err(e) = write_json(&dir.join(SUMMARY), &summary) {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    let timing = Timing { wall_seconds: start.elapsed().as_secs_f64() };
    if let Err(e) = write_json(&dir.join(TIMING), &timing) {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    if req.verbose {
        eprintln!("[bernoulli] {} finished with status {} in {:.2} s", req.mode.as_str(), summary.status, timing.wall_seconds);
    }
    code
}

fn run_mode(ctx: &Ctx, mode: Mode, summary: &mut Summary) -> Result<()> {
    let prepared = ctx.cfg.prepare(mode)?;
    ctx.log(format!("configuration ok, mode {}", mode.as_str()));
    match mode {
        Mode::Oracle => oracle(ctx, summary),
        Mode::Branch => branch(ctx, &prepared, summary),
        Mode::Flow => flow(ctx, &prepared, summary),
        Mode::Solve | Mode::Classify | Mode::Moments => single(ctx, mode, &prepared, summary),
    }
}

fn oracle(ctx: &Ctx, summary: &mut Summary) -> Result<()> {
    let spec = ctx.cfg.oracle.as_ref().expect("checked by prepare");
    let mut rows = Vec::with_capacity(spec.q_values.len());
    for &q in &spec.q_values {
        let roots = radial_branch_roots(q, spec.n)?;
        rows.push(OracleRow { q, r_lower: roots.as_ref().map(|r| r.0.r), r_upper: roots.as_ref().map(|r| r.1.r) });
    }
    let header: Vec<String> = ["q", "r_lower", "r_upper"].iter().map(|s| s.to_string()).collect();
    write_csv(&ctx.dir.join(ORACLE), &header, &rows)?;
    ctx.log(format!("wrote {} oracle rows", rows.len()));
    summary.oracle = Some(rows);
    Ok(())
}

fn initial_state(ctx: &Ctx, p: &Prepared) -> Result<SolutionState> {
    let n = &ctx.cfg.numerics;
    let initial = p.initial.as_ref().expect("checked by prepare");
    let schedule = p.schedule.clone().expect("checked by prepare");
    Ok(state_for(&p.container, initial, n.n_outer, n.n_inner, schedule, ctx.cfg.time)?)
}

fn solve(ctx: &Ctx, p: &Prepared) -> Result<NewtonOutcome> {
    let s0 = initial_state(ctx, p)?;
    ctx.log(format!("initial residual {:.3e}", s0.residual_norm()));
    let out = newton_correct(&s0, &ctx.cfg.numerics.newton())?;
    ctx.log(format!("Newton converged in {} iterations, residual {:.3e}", out.iterations, out.state.residual_norm()));
    Ok(out)
}

fn single(ctx: &Ctx, mode: Mode, p: &Prepared, summary: &mut Summary) -> Result<()> {
    let k_max = ctx.cfg.numerics.k_max;
    let NewtonOutcome { mut state, iterations, .. } = solve(ctx, p)?;
    classify_in_place(&mut state, ctx.cfg.numerics.tau_par)?;
    let record = StateRecord::new(0, &state, k_max);
    write_json(&state_path(ctx.dir, 0), &record)?;

    let labels = record.moments.as_ref().map(|m| m.labels.clone()).unwrap_or_default();
    let row = DiagnosticsRow::initial(&state, record.moments.as_ref(), iterations);
    write_csv(&ctx.dir.join(DIAGNOSTICS), &diagnostics_header(&labels), &[row])?;

    if mode == Mode::Moments {
        let basis = harmonic_test_basis(k_max);
        // certificates need the unit-disk setting; fail loudly otherwise
        moments(&state, &basis)?;
        let mut certs = Vec::with_capacity(basis.len());
        for h in &basis {
            let residual = quadrature_residual(&state, h)?;
            certs.push(Certificate { label: h.label(), residual });
            ctx.log(format!("{}: flux {:.12}, certificate {:.3e}", h.label(), expected_flux(h), residual));
        }
        summary.certificates = Some(certs);
    }
    if let Some(rec) = state.classification() {
        ctx.log(format!("{} (margin {:.3e}, integral of p {:.3e})", rec.kind, rec.nondegeneracy_margin, rec.integral_p));
    }
    summary.states_written = 1;
    summary.newton_iterations = Some(iterations);
    summary.terminal = Some(record);
    Ok(())
}

fn flow(ctx: &Ctx, p: &Prepared, summary: &mut Summary) -> Result<()> {
    let (horizon, opts) = p.flow.clone().expect("checked by prepare");
    let NewtonOutcome { state, iterations, .. } = solve(ctx, p)?;
    ctx.log(format!("integrating to t = {horizon}"));
    let traj = run_flow(&state, horizon, &opts)?;
    ctx.log(format!(
        "{} accepted steps, {} rejected, termination {}",
        traj.diagnostics.len(),
        traj.rejected_steps,
        traj.termination.label()
    ));

    let records: Vec<StateRecord> = traj.states.iter().enumerate().map(|(i, s)| StateRecord::new(i, s, opts.k_max)).collect();
    for r in &records {
        write_json(&state_path(ctx.dir, r.index), r)?;
    }
    let labels = records[0].moments.as_ref().map(|m| m.labels.clone()).unwrap_or_default();
    let mut rows = vec![DiagnosticsRow::initial(&traj.states[0], records[0].moments.as_ref(), iterations)];
    rows.extend(traj.diagnostics.iter().enumerate().map(|(i, d)| DiagnosticsRow::step(i + 1, d, records[i + 1].moments.as_ref())));
    write_csv(&ctx.dir.join(DIAGNOSTICS), &diagnostics_header(&labels), &rows)?;

    let last = traj.last();
    summary.states_written = records.len();
    summary.newton_iterations = Some(iterations);
    summary.termination = Some(TerminationRecord {
        reason: traj.termination.label().to_string(),
        t: last.time(),
        margin: match &traj.termination {
            Termination::ParabolicApproach { margin, .. } => Some(*margin),
            _ => last.classification().map(|c| c.nondegeneracy_margin),
        },
        steps: traj.diagnostics.len(),
        rejected_steps: traj.rejected_steps,
        max_drift: traj.reference_moments.as_ref().map(|_| traj.max_drift()),
    });
    summary.terminal = records.into_iter().last();
    if let Termination::Failed(e) = traj.termination {
        return Err(e.into());
    }
    Ok(())
}

fn branch(ctx: &Ctx, p: &Prepared, summary: &mut Summary) -> Result<()> {
    let spec = ctx.cfg.branch.as_ref().expect("checked by prepare");
    let sched = ctx.cfg.schedule.as_ref().expect("checked by prepare");
    let seeds = spec.seeds.iter().map(|s| s.build()).collect::<Result<Vec<BoundaryCurve>>>()?;
    let n = &ctx.cfg.numerics;
    let opts = SweepOptions { n_outer: n.n_outer, n_inner: n.n_inner, newton: n.newton() };
    ctx.log(format!("sweeping {} Q values x {} seeds", spec.q_values.len(), seeds.len()));
    let rows = branch_sweep(&p.container, &spec.q_values, &seeds, |q| sched.at_level(q), &opts);
    for row in &rows {
        ctx.log(format!(
            "Q = {:.6} seed {}: {:?} {}",
            row.q,
            row.seed,
            row.status,
            row.kind.map_or("-", Kind::as_str)
        ));
    }
    summary.rows = Some(rows);
    Ok(())
}
