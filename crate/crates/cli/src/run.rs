//! Mode drivers: run a resolved configuration and write its output files.

use std::io;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use tfch::bounds::{
    bound_vs_simulation, constants_from_initial_data, ln_min_height_bound_physical, min_height_bound_physical, BoundInputs,
};
use tfch::equilibrium::{solve_bvp, sweep_dip, trend};
use tfch::galerkin::{evolve_galerkin, GalerkinSystem};
use tfch::inequalities::{check_sobolev_inequalities, random_trig_polynomial};
use tfch::timestepper::{perturbed_uniform, single_mode, RunStatus};
use tfch::{evolve, Error, Grid64, State64, TrajectoryRecord};

use crate::config::{InitKind, Mode, RunConfig};
use crate::output::{write_csv, write_json, write_svg_line, Column, OutputDir};

/// Conservation, energy and boundary-slope tolerance.
pub const INVARIANT_TOL: f64 = 1e-8;
/// Floor for the functional-inequality slacks.
pub const SLACK_TOL: f64 = -1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Success,
    /// The solver gave up; outputs hold whatever was computed.
    SolverFailure(String),
    InvariantViolation(Vec<String>),
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Success => 0,
            Status::SolverFailure(_) => 3,
            Status::InvariantViolation(_) => 4,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Status::Success => "success",
            Status::SolverFailure(_) => "solver_failure",
            Status::InvariantViolation(_) => "invariant_violation",
        }
    }
}

/// Failures that stop a run before any result exists (exit code 2).
#[derive(Debug)]
pub enum SetupError {
    Config(String),
    Io(io::Error),
}

impl std::fmt::Display for SetupError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SetupError::Config(m) => write!(f, "configuration error: {m}"),
            SetupError::Io(e) => write!(f, "output error: {e}"),
        }
    }
}

impl From<io::Error> for SetupError {
    fn from(e: io::Error) -> Self {
        SetupError::Io(e)
    }
}

/// Input problems are configuration errors; everything else is the solver's.
fn is_input_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidGrid(_)
            | Error::InvalidParams(_)
            | Error::InvalidConfig(_)
            | Error::NonPositiveHeight { .. }
            | Error::GridMismatch
            | Error::LengthMismatch { .. }
            | Error::DerivativeOrder(_)
            | Error::DegenerateBound(_)
            | Error::Unsupported(_)
    )
}

/// Result of a mode: its status and the diagnostics recorded in the metadata.
struct ModeResult {
    status: Status,
    diagnostics: Map<String, Value>,
}

/// Convert a core error into either a setup error or a solver failure.
fn solver<T>(r: tfch::Result<T>) -> Result<Result<T, String>, SetupError> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(e) if is_input_error(&e) => Err(SetupError::Config(e.to_string())),
        Err(e) => Ok(Err(e.to_string())),
    }
}

fn failed(msg: String) -> ModeResult {
    let mut diagnostics = Map::new();
    diagnostics.insert("error".into(), Value::String(msg.clone()));
    ModeResult { status: Status::SolverFailure(msg), diagnostics }
}

/// Report of a finished run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    pub metadata: Value,
}

/// Run `cfg`, writing data files and `metadata.json` into `out`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<Outcome, SetupError> {
    let started = Instant::now();
    let mut dir = OutputDir::create(out)?;
    let result = match cfg.mode {
        Mode::Evolve => run_evolve(cfg, &mut dir)?,
        Mode::Galerkin => run_galerkin(cfg, &mut dir)?,
        Mode::Bvp => run_bvp(cfg, &mut dir)?,
        Mode::Sweep => run_sweep(cfg, &mut dir)?,
        Mode::Bound => run_bound(cfg, &mut dir)?,
        Mode::CheckInequalities => run_inequalities(cfg, &mut dir)?,
    };
    let files = dir.written().to_vec();
    let detail = match &result.status {
        Status::Success => Value::Null,
        Status::SolverFailure(m) => json!(m),
        Status::InvariantViolation(v) => json!(v),
    };
    let metadata = json!({
        "mode": cfg.mode.name(),
        "seed": cfg.seed,
        "config": cfg.echo,
        "versions": { "tfch-cli": env!("CARGO_PKG_VERSION"), "tfch-core": tfch::VERSION },
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "status": result.status.name(),
        "status_detail": detail,
        "exit_code": result.status.exit_code(),
        "partial": matches!(result.status, Status::SolverFailure(_)),
        "diagnostics": result.diagnostics,
        "files": files,
    });
    write_json(&dir.file("metadata.json"), &metadata)?;
    Ok(Outcome { status: result.status, metadata })
}

fn initial_state(cfg: &RunConfig) -> Result<State64, SetupError> {
    let setup = |e: Error| SetupError::Config(e.to_string());
    let grid = Grid64::new(cfg.grid_length, cfg.grid_n).map_err(setup)?;
    let s = match cfg.init.kind {
        InitKind::Perturbed => perturbed_uniform(&grid, cfg.init.amplitude, cfg.seed),
        InitKind::SingleMode => single_mode(&grid, cfg.init.mode, cfg.init.amplitude, cfg.init.component),
        InitKind::Uniform => State64::uniform(&grid, cfg.init.h, cfg.init.c),
    };
    s.map_err(setup)
}

fn check(violations: &mut Vec<String>, ok: bool, what: impl FnOnce() -> String) {
    if !ok {
        violations.push(what());
    }
}

fn status_of(violations: Vec<String>) -> Status {
    if violations.is_empty() {
        Status::Success
    } else {
        Status::InvariantViolation(violations)
    }
}

/// Same normalization as the core drift diagnostics: `max |S(t) - S(0)| / max(|S(0)|, L)`.
fn drift(series: &[f64], length: f64) -> f64 {
    let s0 = series[0];
    series.iter().fold(0.0, |m, &v| m.max((v - s0).abs() / s0.abs().max(length)))
}

/// Trajectory tables, final state, plots and the shared conservation/energy checks.
/// For Galerkin runs `solute` carries the regularized solute `int g(h) c`: it is conserved only in
/// continuous time (it is nonlinear in the coefficients), so its drift is reported, not enforced.
fn write_trajectory(
    cfg: &RunConfig,
    dir: &mut OutputDir,
    rec: &TrajectoryRecord<f64>,
    solute: Option<&[f64]>,
) -> Result<ModeResult, SetupError> {
    let e = &rec.energy_series;
    let energy: Vec<f64> = e.iter().map(|b| b.total).collect();
    write_csv(
        &dir.file("trajectory.csv"),
        &[
            ("t", Column::Real(&rec.times)),
            ("energy", Column::Real(&energy)),
            ("energy_film", Column::Real(&e.iter().map(|b| b.f1).collect::<Vec<_>>())),
            ("energy_mixing", Column::Real(&e.iter().map(|b| b.f2).collect::<Vec<_>>())),
            ("dissipation", Column::Real(&e.iter().map(|b| b.dissipation()).collect::<Vec<_>>())),
            ("h_min", Column::Real(&rec.h_min_series)),
            ("volume", Column::Real(&rec.volume_series)),
            ("mass", Column::Real(&rec.mass_series)),
        ],
    )?;
    let last = rec.final_state();
    let x: Vec<f64> = (0..last.grid().n()).map(|i| last.grid().x(i)).collect();
    write_csv(
        &dir.file("final_state.csv"),
        &[("x", Column::Real(&x)), ("h", Column::Real(last.h().values())), ("c", Column::Real(last.c().values()))],
    )?;
    if cfg.plots {
        write_svg_line(&dir.file("h.svg"), "film height h(x), final", "x", &x, last.h().values())?;
        write_svg_line(&dir.file("c.svg"), "concentration c(x), final", "x", &x, last.c().values())?;
        write_svg_line(&dir.file("energy.svg"), "free energy F(t)", "t", &rec.times, &energy)?;
        write_svg_line(&dir.file("h_min.svg"), "minimum height h_min(t)", "t", &rec.times, &rec.h_min_series)?;
    }

    let (vd, md, rise) = (rec.volume_drift(), rec.mass_drift(), rec.max_energy_increase());
    let lyapunov = e.first().is_some_and(|b| b.lyapunov);
    let mut d = Map::new();
    d.insert("t_final".into(), json!(rec.times.last()));
    d.insert("records".into(), json!(rec.times.len()));
    d.insert("h_min_observed".into(), json!(rec.h_min_observed));
    d.insert("final_h_min".into(), json!(last.h_min()));
    d.insert("volume_drift".into(), json!(vd));
    d.insert("mass_drift".into(), json!(md));
    if let Some(series) = solute {
        d.insert("regularized_mass_drift".into(), json!(drift(series, last.grid().length())));
    }
    d.insert("max_energy_increase".into(), json!(rise.max(f64::MIN)));
    d.insert("energy_is_lyapunov".into(), json!(lyapunov));
    let st = &rec.step_stats;
    d.insert(
        "steps".into(),
        json!({
            "accepted": st.accepted, "rejected": st.rejected, "energy_rejections": st.energy_rejections,
            "newton_failures": st.newton_failures, "positivity_rejections": st.positivity_rejections,
        }),
    );

    let mut v = Vec::new();
    check(&mut v, vd <= INVARIANT_TOL, || format!("volume drift {vd:e} exceeds {INVARIANT_TOL:e}"));
    check(&mut v, solute.is_some() || md <= INVARIANT_TOL, || format!("solute drift {md:e} exceeds {INVARIANT_TOL:e}"));
    check(&mut v, !lyapunov || rise <= INVARIANT_TOL, || format!("energy rose by {rise:e}"));
    check(&mut v, rec.h_min_observed > 0.0, || format!("film ruptured (h_min {})", rec.h_min_observed));
    let status = match &rec.status {
        RunStatus::Aborted(msg) => {
            d.insert("error".into(), json!(msg));
            Status::SolverFailure(msg.clone())
        }
        RunStatus::Completed => status_of(v),
    };
    Ok(ModeResult { status, diagnostics: d })
}

fn run_evolve(cfg: &RunConfig, dir: &mut OutputDir) -> Result<ModeResult, SetupError> {
    let s0 = initial_state(cfg)?;
    let rec = match solver(evolve(&s0, &cfg.params, &cfg.solver))? {
        Ok(r) => r,
        Err(m) => return Ok(failed(m)),
    };
    let mut res = write_trajectory(cfg, dir, &rec, None)?;
    // no-rupture certificate, where the analysis applies
    if let Ok(b) = constants_from_initial_data(&s0, &cfg.params) {
        if let Ok(report) = bound_vs_simulation(&rec, &b) {
            res.diagnostics.insert(
                "min_height_bound".into(),
                json!({ "bound": report.bound, "ln_bound": report.ln_bound, "observed_min": report.observed_min, "holds": report.holds }),
            );
            if !report.holds {
                let msg = format!("h_min {} fell below the guaranteed bound {:e}", report.observed_min, report.bound);
                match &mut res.status {
                    Status::Success => res.status = Status::InvariantViolation(vec![msg]),
                    Status::InvariantViolation(v) => v.push(msg),
                    Status::SolverFailure(_) => {}
                }
            }
        }
    }
    Ok(res)
}

fn run_galerkin(cfg: &RunConfig, dir: &mut OutputDir) -> Result<ModeResult, SetupError> {
    let s0 = initial_state(cfg)?;
    let sys = match solver(GalerkinSystem::from_state(&s0, cfg.galerkin_modes, cfg.galerkin_eps))? {
        Ok(s) => s,
        Err(m) => return Ok(failed(m)),
    };
    let rec = match solver(evolve_galerkin(&sys, &cfg.params, &cfg.solver))? {
        Ok(r) => r,
        Err(m) => return Ok(failed(m)),
    };
    let fam = sys.family();
    let solute: Vec<f64> = rec
        .states
        .iter()
        .map(|st| {
            let g = st.grid();
            st.h().values().iter().zip(st.c().values()).map(|(&h, &c)| fam.g(h) * c).sum::<f64>() * g.dx()
        })
        .collect();
    let mut res = write_trajectory(cfg, dir, &rec, Some(&solute))?;
    res.diagnostics.insert("modes".into(), json!(cfg.galerkin_modes));
    res.diagnostics.insert("eps".into(), json!(cfg.galerkin_eps));
    Ok(res)
}

fn run_bvp(cfg: &RunConfig, dir: &mut OutputDir) -> Result<ModeResult, SetupError> {
    let prof = match solver(solve_bvp(&cfg.params, &cfg.bvp))? {
        Ok(p) => p,
        Err(m) => return Ok(failed(m)),
    };
    write_csv(&dir.file("h_profile.csv"), &[("x", Column::Real(&prof.x)), ("value", Column::Real(&prof.h))])?;
    write_csv(&dir.file("c_profile.csv"), &[("x", Column::Real(&prof.x)), ("value", Column::Real(&prof.c))])?;
    if cfg.plots {
        write_svg_line(&dir.file("h.svg"), "equilibrium height h(x)", "x", &prof.x, &prof.h)?;
        write_svg_line(&dir.file("c.svg"), "equilibrium concentration c(x)", "x", &prof.x, &prof.c)?;
    }
    let slope = prof.max_end_slope();
    let mut d = Map::new();
    d.insert("h_min".into(), json!(prof.h_min));
    d.insert("max_grad_c".into(), json!(prof.max_grad_c));
    d.insert("interface_width".into(), json!(prof.interface_width));
    d.insert("residual".into(), json!(prof.residual_norm));
    d.insert("iterations".into(), json!(prof.iterations));
    d.insert("max_end_slope".into(), json!(slope));
    d.insert("fd_order".into(), json!(prof.fd_order));
    let mut v = Vec::new();
    check(&mut v, slope <= INVARIANT_TOL, || format!("end slope {slope:e} exceeds {INVARIANT_TOL:e}; widen bvp.X"));
    check(&mut v, prof.h_min > 0.0, || format!("nonpositive h_min {}", prof.h_min));
    Ok(ModeResult { status: status_of(v), diagnostics: d })
}

fn run_sweep(cfg: &RunConfig, dir: &mut OutputDir) -> Result<ModeResult, SetupError> {
    let rows = match solver(sweep_dip(&cfg.params, &cfg.sweep, &cfg.bvp))? {
        Ok(r) => r,
        Err(m) => return Ok(failed(m)),
    };
    let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let h_min: Vec<f64> = rows.iter().map(|r| r.h_min).collect();
    let grad: Vec<f64> = rows.iter().map(|r| r.max_grad_c).collect();
    let status: Vec<String> = rows.iter().map(|r| if r.error.is_some() { "failed" } else { "ok" }.to_owned()).collect();
    write_csv(
        &dir.file("sweep.csv"),
        &[
            (cfg.sweep.name(), Column::Real(&values)),
            ("h_min", Column::Real(&h_min)),
            ("max_grad_c", Column::Real(&grad)),
            ("residual", Column::Real(&rows.iter().map(|r| r.residual).collect::<Vec<_>>())),
            ("iterations", Column::Int(&rows.iter().map(|r| r.iterations).collect::<Vec<_>>())),
            ("status", Column::Text(&status)),
        ],
    )?;
    if cfg.plots {
        write_svg_line(&dir.file("h_min.svg"), &format!("h_min against {}", cfg.sweep.name()), cfg.sweep.name(), &values, &h_min)?;
    }
    let failures: Vec<Value> = rows
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| json!({ "value": r.value, "error": e })))
        .collect();
    let mut d = Map::new();
    d.insert("parameter".into(), json!(cfg.sweep.name()));
    d.insert("points".into(), json!(rows.len()));
    d.insert("h_min_trend".into(), json!(trend(&h_min).name()));
    d.insert("max_grad_c_trend".into(), json!(trend(&grad).name()));
    d.insert("failures".into(), json!(failures));
    let status = if failures.is_empty() {
        Status::Success
    } else {
        Status::SolverFailure(format!("{} of {} sweep points failed", failures.len(), rows.len()))
    };
    Ok(ModeResult { status, diagnostics: d })
}

fn run_bound(cfg: &RunConfig, dir: &mut OutputDir) -> Result<ModeResult, SetupError> {
    let b = &cfg.bound;
    let mut d = Map::new();
    let (f0, f1) = match (b.f0, b.f1) {
        (Some(f0), Some(f1)) => (f0, f1),
        (f0, f1) => {
            let s0 = initial_state(cfg)?;
            let k = solver(constants_from_initial_data(&s0, &cfg.params))?.map_err(SetupError::Config)?;
            d.insert("k1".into(), json!(k.k1));
            d.insert("k4".into(), json!(k.k4));
            (f0.unwrap_or(k.f0), f1.unwrap_or(k.f1))
        }
    };
    let mut m = Vec::with_capacity(b.a_values.len());
    let mut ln_m = Vec::with_capacity(b.a_values.len());
    for &a in &b.a_values {
        let inputs = BoundInputs::physical(f0, f1, b.capillary, a, b.length);
        m.push(solver(min_height_bound_physical(&inputs))?.map_err(SetupError::Config)?);
        ln_m.push(solver(ln_min_height_bound_physical(&inputs))?.map_err(SetupError::Config)?);
    }
    write_csv(
        &dir.file("M_curve.csv"),
        &[("A_abs", Column::Real(&b.a_values)), ("M", Column::Real(&m)), ("ln_M", Column::Real(&ln_m))],
    )?;
    if cfg.plots {
        write_svg_line(&dir.file("M_curve.svg"), "minimum-height bound M(|A|)", "|A|", &b.a_values, &m)?;
    }
    let peak = (0..ln_m.len()).fold(0, |best, i| if ln_m[i] > ln_m[best] { i } else { best });
    d.insert("F0".into(), json!(f0));
    d.insert("F1".into(), json!(f1));
    d.insert("C".into(), json!(b.capillary));
    d.insert("L".into(), json!(b.length));
    d.insert("argmax_A_abs".into(), json!(b.a_values[peak]));
    d.insert("max_M".into(), json!(m[peak]));
    d.insert("interior_maximum".into(), json!(peak > 0 && peak + 1 < m.len()));
    let mut v = Vec::new();
    check(&mut v, ln_m.iter().all(|l| l.is_finite()), || "bound is not positive at every |A|".into());
    Ok(ModeResult { status: status_of(v), diagnostics: d })
}

fn run_inequalities(cfg: &RunConfig, dir: &mut OutputDir) -> Result<ModeResult, SetupError> {
    let q = &cfg.inequalities;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut first, mut second) = (f64::INFINITY, f64::INFINITY);
    let mut worst = json!(null);
    let mut unreliable = 0usize;
    for draw in 0..q.draws {
        let length = if q.length_range.1 > q.length_range.0 { rng.gen_range(q.length_range.0..=q.length_range.1) } else { q.length_range.0 };
        let degree = rng.gen_range(1..=q.max_degree);
        let grid = Grid64::new(length, q.n).map_err(|e| SetupError::Config(e.to_string()))?;
        let field = solver(random_trig_polynomial(&grid, degree, &mut rng))?.map_err(SetupError::Config)?.0;
        let s = match solver(check_sobolev_inequalities(&field))? {
            Ok(s) => s,
            Err(m) => return Ok(failed(m)),
        };
        if !s.reliable {
            unreliable += 1;
        }
        if s.min_slack() < first.min(second) {
            worst = json!({ "draw": draw, "length": length, "degree": degree, "slack": s.min_slack() });
        }
        first = first.min(s.first_slack);
        second = second.min(s.second_slack);
    }
    let min_slack = first.min(second);
    let passed = q.draws == 0 || (min_slack >= SLACK_TOL && unreliable == 0);
    let summary = json!({
        "draws": q.draws,
        "seed": cfg.seed,
        "min_slack": min_slack,
        "min_first_slack": first,
        "min_second_slack": second,
        "unreliable_fields": unreliable,
        "worst": worst,
        "tolerance": SLACK_TOL,
        "passed": passed,
    });
    write_json(&dir.file("summary.json"), &summary)?;
    let mut d = Map::new();
    d.insert("min_slack".into(), json!(min_slack));
    d.insert("unreliable_fields".into(), json!(unreliable));
    let mut v = Vec::new();
    check(&mut v, passed, || format!("minimum slack {min_slack:e} (tolerance {SLACK_TOL:e}), {unreliable} unresolved fields"));
    Ok(ModeResult { status: status_of(v), diagnostics: d })
}
