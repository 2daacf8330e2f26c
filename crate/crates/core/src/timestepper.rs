//! Time integration of the film/concentration system on the periodic grid.
//!
//! Both schemes advance `h` and `q = c h` in divergence form, so the zero
//! Fourier modes (volume and mass) only see roundoff.
//!
//! * `SemiImplicit`: stabilized Euler. The constant-coefficient biharmonic
//!   parts `kappa_h d4 h` (`kappa_h = max(h^3) / (3C)`) and `Cn^2 d4 c` are
//!   implicit in Fourier space, everything else explicit.
//! * `FullyImplicit`: variable-step BDF2 with simplified Newton (first step
//!   backward Euler), for certification runs and order checks.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{check_finite, Grid};
use crate::model::{check_positive, energy_values, rhs_values, EnergyBreakdown, Params, State};
use crate::ode::{ImplicitStepper, NewtonSettings, OdeSystem};
use crate::scalar::{lit, max_abs, max_value, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    SemiImplicit,
    FullyImplicit,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::SemiImplicit => "semi_implicit",
            Scheme::FullyImplicit => "fully_implicit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "semi_implicit" => Some(Scheme::SemiImplicit),
            "fully_implicit" => Some(Scheme::FullyImplicit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<T> {
    pub t_end: T,
    pub dt_init: T,
    pub dt_min: T,
    pub dt_max: T,
    pub newton_tol: T,
    pub newton_max_iter: usize,
    /// Diagnostic cadence in time units.
    pub record_every: T,
    pub scheme: Scheme,
    /// Step rejected when `max|dh| / h_min` or `max|dc|` exceeds this.
    pub max_change: T,
    /// Reject steps that raise `F` above its running minimum by more than
    /// `energy_slack` (only when `F` is a Lyapunov functional).
    pub energy_guard: bool,
    pub energy_slack: T,
}

impl<T: Real> SolverConfig<T> {
    pub fn new(t_end: T, dt_init: T) -> Self {
        Self {
            t_end,
            dt_init,
            dt_min: (dt_init * lit(1e-6)).min(lit(1e-10)),
            dt_max: dt_init.max(lit(0.1)),
            newton_tol: lit(1e-10),
            newton_max_iter: 20,
            record_every: t_end / lit(100.0),
            scheme: Scheme::SemiImplicit,
            max_change: lit(0.1),
            energy_guard: true,
            energy_slack: lit(1e-9),
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Constant step: `dt_min = dt_init = dt_max`.
    pub fn fixed_step(mut self) -> Self {
        self.dt_min = self.dt_init;
        self.dt_max = self.dt_init;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let finite = [self.t_end, self.dt_init, self.dt_min, self.dt_max, self.record_every, self.newton_tol];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("solver settings must be finite".into());
        }
        if !(self.t_end > T::zero()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(T::zero() < self.dt_min && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return bad(format!(
                "need 0 < dt_min <= dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            ));
        }
        if !(self.record_every > T::zero()) {
            return bad("record_every must be positive".into());
        }
        if !(self.newton_tol > T::zero()) || self.newton_max_iter == 0 {
            return bad("newton_tol must be positive and newton_max_iter at least 1".into());
        }
        if !(self.max_change > T::zero()) {
            return bad("max_change must be positive".into());
        }
        Ok(())
    }

    fn newton(&self) -> NewtonSettings<T> {
        NewtonSettings { tol: self.newton_tol, max_iter: self.newton_max_iter }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    /// Partial trajectory; the reason is a human-readable diagnostic.
    Aborted(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub energy_rejections: usize,
    pub newton_failures: usize,
    pub positivity_rejections: usize,
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord<T: Real> {
    pub times: Vec<T>,
    pub states: Vec<State<T>>,
    pub energy_series: Vec<EnergyBreakdown<T>>,
    pub h_min_series: Vec<T>,
    pub volume_series: Vec<T>,
    pub mass_series: Vec<T>,
    pub step_stats: StepStats,
    /// Smallest `h` seen at any accepted step, not only at records.
    pub h_min_observed: T,
    pub status: RunStatus,
}

impl<T: Real> TrajectoryRecord<T> {
    pub(crate) fn new() -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
            energy_series: Vec::new(),
            h_min_series: Vec::new(),
            volume_series: Vec::new(),
            mass_series: Vec::new(),
            step_stats: StepStats::default(),
            h_min_observed: T::infinity(),
            status: RunStatus::Completed,
        }
    }

    pub(crate) fn push(&mut self, t: T, s: State<T>, e: EnergyBreakdown<T>) {
        self.times.push(t);
        self.h_min_series.push(s.h_min());
        self.volume_series.push(s.volume());
        self.mass_series.push(s.mass());
        self.energy_series.push(e);
        self.states.push(s);
    }

    pub fn completed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    pub fn final_state(&self) -> &State<T> {
        self.states.last().expect("at least the initial record")
    }

    /// Largest `|V(t) - V(0)| / scale` over the records, `scale = max(|V(0)|, L)`.
    fn drift(series: &[T], length: T) -> T {
        let v0 = series[0];
        let scale = v0.abs().max(length);
        series.iter().fold(T::zero(), |m, &v| m.max((v - v0).abs() / scale))
    }

    pub fn volume_drift(&self) -> T {
        Self::drift(&self.volume_series, self.final_state().grid().length())
    }

    /// Mass `int c h` can vanish for zero-mean data, so it is normalized by `max(|M0|, L)`.
    pub fn mass_drift(&self) -> T {
        Self::drift(&self.mass_series, self.final_state().grid().length())
    }

    /// Largest increase `F(t_{k+1}) - F(t_k)` between consecutive records (negative when decaying).
    pub fn max_energy_increase(&self) -> T {
        self.energy_series
            .windows(2)
            .map(|w| w[1].total - w[0].total)
            .fold(T::neg_infinity(), T::max)
    }
}

/// Stabilized semi-implicit update of `(h, q)`; returns new `(h, c)` samples.
fn semi_implicit_values<T: Real>(grid: &Grid<T>, h: &[T], c: &[T], p: &Params<T>, dt: T) -> Result<(Vec<T>, Vec<T>)> {
    let n = h.len();
    let (rh, rq) = rhs_values(grid, h, c, p)?;
    let h3max = max_value(&h.iter().map(|&v| v * v * v).collect::<Vec<_>>());
    let kappa_h = h3max / (lit::<T>(3.0) * p.capillary);
    let kappa_c = p.cahn * p.cahn;
    let k = grid.wavenumbers();
    // (1 + dt kappa_h k^4) dh^ = dt rh^
    let rh_hat = grid.forward(&rh);
    let dh_hat: Vec<Complex<T>> = (0..n)
        .map(|j| {
            let k4 = k[j].powi(4);
            rh_hat[j] * (dt / (T::one() + dt * kappa_h * k4))
        })
        .collect();
    let dh = grid.inverse(dh_hat);
    // (1 + dt kappa_c k^4) dq^ = dt rq^ + dt kappa_c k^4 (c dh)^ stabilizes the
    // concentration, since dq - c dh ~ h dc.
    let cdh: Vec<T> = (0..n).map(|i| c[i] * dh[i]).collect();
    let cdh_hat = grid.forward(&cdh);
    let rq_hat = grid.forward(&rq);
    let dq_hat: Vec<Complex<T>> = (0..n)
        .map(|j| {
            let s = dt * kappa_c * k[j].powi(4);
            (rq_hat[j] * dt + cdh_hat[j] * s) / (T::one() + s)
        })
        .collect();
    let dq = grid.inverse(dq_hat);
    let h_new: Vec<T> = (0..n).map(|i| h[i] + dh[i]).collect();
    check_finite(&h_new, "film height")?;
    check_positive(&h_new)?;
    let c_new: Vec<T> = (0..n).map(|i| (c[i] * h[i] + dq[i]) / h_new[i]).collect();
    check_finite(&c_new, "concentration")?;
    Ok((h_new, c_new))
}

/// The grid system in `(h, q)` variables for the implicit integrator.
struct GridSystem<'a, T: Real> {
    grid: &'a Grid<T>,
    params: &'a Params<T>,
}

impl<T: Real> OdeSystem<T> for GridSystem<'_, T> {
    fn dim(&self) -> usize {
        2 * self.grid.n()
    }

    fn rhs(&self, y: &[T]) -> Result<Vec<T>> {
        let n = self.grid.n();
        let (h, q) = y.split_at(n);
        check_positive(h)?;
        check_finite(y, "implicit iterate")?;
        let c: Vec<T> = (0..n).map(|i| q[i] / h[i]).collect();
        let (dh, dq) = rhs_values(self.grid, h, &c, self.params)?;
        Ok([dh, dq].concat())
    }
}

fn pack<T: Real>(s: &State<T>) -> Vec<T> {
    [s.h().values().to_vec(), s.ch()].concat()
}

fn unpack<T: Real>(grid: &Grid<T>, y: &[T]) -> Result<State<T>> {
    let n = grid.n();
    let (h, q) = y.split_at(n);
    check_finite(y, "implicit solution")?;
    check_positive(h)?;
    let c = (0..n).map(|i| q[i] / h[i]).collect();
    State::new(grid.field(h.to_vec())?, grid.field(c)?)
}

/// One step of size `dt`. The fully implicit scheme takes a backward Euler
/// step here; [`evolve`] uses BDF2 once it has history.
pub fn step<T: Real>(s: &State<T>, p: &Params<T>, dt: T, cfg: &SolverConfig<T>) -> Result<State<T>> {
    if !(dt > T::zero()) {
        return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    let g = s.grid();
    match cfg.scheme {
        Scheme::SemiImplicit => {
            let (h, c) = semi_implicit_values(g, s.h().values(), s.c().values(), p, dt)?;
            State::new(g.field(h)?, g.field(c)?)
        }
        Scheme::FullyImplicit => {
            let sys = GridSystem { grid: g, params: p };
            let mut st = ImplicitStepper::new();
            let out = st.step(&sys, &pack(s), None, dt, cfg.newton())?;
            unpack(g, &out.y)
        }
    }
}

/// Integrate to `cfg.t_end` with adaptive steps. Invalid input is an error;
/// solver breakdown returns the partial record with `RunStatus::Aborted`.
pub fn evolve<T: Real>(s0: &State<T>, p: &Params<T>, cfg: &SolverConfig<T>) -> Result<TrajectoryRecord<T>> {
    cfg.validate()?;
    p.validate()?;
    let g = s0.grid().clone();
    let guard = cfg.energy_guard && p.has_lyapunov_functional();
    let mut rec = TrajectoryRecord::new();
    let e0 = energy_values(&g, s0.h().values(), s0.c().values(), p)?;
    rec.push(T::zero(), s0.clone(), e0);
    rec.h_min_observed = s0.h_min();

    let sys = GridSystem { grid: &g, params: p };
    let mut implicit = ImplicitStepper::new();
    let mut state = s0.clone();
    let mut history: Option<(Vec<T>, T)> = None;
    let mut t = T::zero();
    let mut dt = cfg.dt_init;
    let mut f_floor = e0.total;
    let mut next_record = cfg.record_every.min(cfg.t_end);
    let tiny = cfg.t_end * lit(1e-12);

    while t < cfg.t_end - tiny {
        let step_dt = dt.min(next_record - t);
        let attempt: Result<(State<T>, usize)> = match cfg.scheme {
            Scheme::SemiImplicit => {
                semi_implicit_values(&g, state.h().values(), state.c().values(), p, step_dt)
                    .and_then(|(h, c)| State::new(g.field(h)?, g.field(c)?))
                    .map(|s| (s, 0))
            }
            Scheme::FullyImplicit => {
                let y = pack(&state);
                // BDF2 is zero-stable only for step ratios below 1 + sqrt(2)
                let hist = history
                    .as_ref()
                    .filter(|(_, d)| step_dt <= *d * lit(2.0))
                    .map(|(v, d)| (v.as_slice(), *d));
                implicit
                    .step(&sys, &y, hist, step_dt, cfg.newton())
                    .and_then(|out| Ok((unpack(&g, &out.y)?, out.iterations)))
            }
        };
        let verdict = attempt.and_then(|(next, iters)| {
            let e = energy_values(&g, next.h().values(), next.c().values(), p)?;
            Ok((next, iters, e))
        });
        let mut reject = |why: &str, stats: &mut StepStats| -> bool {
            stats.rejected += 1;
            match why {
                "energy" => stats.energy_rejections += 1,
                "newton" => stats.newton_failures += 1,
                "positivity" => stats.positivity_rejections += 1,
                _ => {}
            }
            dt = dt / lit(2.0);
            dt >= cfg.dt_min
        };
        let (next, iters, e) = match verdict {
            Ok(v) => v,
            Err(err) => {
                let why = match err {
                    Error::NonPositiveHeight { .. } => "positivity",
                    Error::NewtonDivergence { .. } | Error::Singular(_) => "newton",
                    _ => "other",
                };
                implicit.reset();
                if !reject(why, &mut rec.step_stats) {
                    rec.status = RunStatus::Aborted(format!("step size fell below dt_min at t = {t}: {err}"));
                    break;
                }
                continue;
            }
        };
        let dh = max_abs(&diff(next.h().values(), state.h().values())) / state.h_min();
        let dc = max_abs(&diff(next.c().values(), state.c().values()));
        let change = dh.max(dc);
        if change > cfg.max_change {
            implicit.reset();
            if !reject("change", &mut rec.step_stats) {
                rec.status = RunStatus::Aborted(format!("step size fell below dt_min at t = {t}: change {change}"));
                break;
            }
            continue;
        }
        if guard && e.total > f_floor + cfg.energy_slack {
            implicit.reset();
            if !reject("energy", &mut rec.step_stats) {
                rec.status = RunStatus::Aborted(format!(
                    "energy increased by {} at dt_min, t = {t}",
                    e.total - f_floor
                ));
                break;
            }
            continue;
        }

        // accepted
        rec.step_stats.accepted += 1;
        let easy = change < cfg.max_change / lit(4.0) && iters <= 4;
        if cfg.scheme == Scheme::FullyImplicit {
            history = Some((pack(&state), step_dt));
        }
        state = next;
        t = t + step_dt;
        f_floor = f_floor.min(e.total);
        rec.h_min_observed = rec.h_min_observed.min(state.h_min());
        if easy && step_dt == dt {
            dt = (dt * lit(1.2)).min(cfg.dt_max);
        }
        if t >= next_record - tiny {
            rec.push(t, state.clone(), e);
            next_record = (next_record + cfg.record_every).min(cfg.t_end);
        }
    }
    Ok(rec)
}

fn diff<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// `h = 1` and `c` uniform in `[-amplitude, amplitude]` with its mean removed.
pub fn perturbed_uniform<T: Real>(grid: &Grid<T>, amplitude: T, seed: u64) -> Result<State<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = amplitude.to_f64_lossy();
    let raw: Vec<T> = (0..grid.n()).map(|_| lit(rng.gen_range(-a..=a))).collect();
    let mean = raw.iter().copied().sum::<T>() / T::from_count(grid.n());
    let c = raw.into_iter().map(|v| v - mean).collect();
    State::new(grid.constant(T::one())?, grid.field(c)?)
}

/// Which field a seeded single-mode perturbation goes into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Height,
    Concentration,
}

/// `(1, 0)` plus `amplitude * cos(2 pi m x / L)` in one component.
pub fn single_mode<T: Real>(grid: &Grid<T>, mode: usize, amplitude: T, which: Component) -> Result<State<T>> {
    let k = T::TAU() * T::from_count(mode) / grid.length();
    let wave = grid.field_from_fn(|x| amplitude * (k * x).cos())?;
    match which {
        Component::Height => State::new(wave.map(|v| T::one() + v)?, grid.constant(T::zero())?),
        Component::Concentration => State::new(grid.constant(T::one())?, wave),
    }
}

/// Amplitude of Fourier mode `m` (`2 |f^_m| / n`).
pub fn mode_amplitude<T: Real>(grid: &Grid<T>, values: &[T], mode: usize) -> T {
    let spec = grid.forward(values);
    spec[mode].norm() * lit(2.0) / T::from_count(grid.n())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::min_value;

    fn params() -> Params<f64> {
        Params::<f64>::scaled_point()
    }

    #[test]
    fn config_validation() {
        let c = SolverConfig::new(1.0, 1e-3);
        assert!(c.validate().is_ok());
        let mut bad = c;
        bad.dt_min = 1.0;
        assert!(bad.validate().is_err());
        assert!(SolverConfig::new(0.0, 1e-3).validate().is_err());
        assert_eq!(Scheme::parse("fully_implicit"), Some(Scheme::FullyImplicit));
        assert_eq!(Scheme::parse(Scheme::SemiImplicit.name()), Some(Scheme::SemiImplicit));
        assert_eq!(Scheme::parse("rk4"), None);
    }

    #[test]
    fn uniform_state_is_fixed_point() {
        let g = Grid::new(10.0, 32).unwrap();
        let s = State::uniform(&g, 1.0, 0.0).unwrap();
        for scheme in [Scheme::SemiImplicit, Scheme::FullyImplicit] {
            let cfg = SolverConfig::new(1.0, 0.5).with_scheme(scheme);
            let next = step(&s, &params(), 0.5, &cfg).unwrap();
            assert!(max_abs(&diff(next.h().values(), s.h().values())) <= 1e-10);
            assert!(max_abs(next.c().values()) <= 1e-10);
        }
    }

    #[test]
    fn single_mode_growth_per_step() {
        let l = 16.0 * std::f64::consts::PI;
        let g = Grid::new(l, 64).unwrap();
        let p = params();
        let m = 4;
        let k = std::f64::consts::TAU * m as f64 / l;
        let s = single_mode(&g, m, 1e-6, Component::Concentration).unwrap();
        let dt = 1e-3;
        for scheme in [Scheme::SemiImplicit, Scheme::FullyImplicit] {
            let cfg = SolverConfig::new(1.0, dt).with_scheme(scheme);
            let next = step(&s, &p, dt, &cfg).unwrap();
            let ratio = mode_amplitude(&g, next.c().values(), m) / mode_amplitude(&g, s.c().values(), m);
            let expected = (crate::model::linear_growth_rates(&p, k).1 * dt).exp();
            assert!((ratio - expected).abs() <= 1e-3 * expected, "{scheme:?}: {ratio} vs {expected}");
        }
    }

    #[test]
    fn perturbation_is_reproducible_and_zero_mean() {
        let g = Grid::new(5.0, 64).unwrap();
        let a = perturbed_uniform(&g, 0.01, 3).unwrap();
        let b = perturbed_uniform(&g, 0.01, 3).unwrap();
        let c = perturbed_uniform(&g, 0.01, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.c().values().iter().sum::<f64>().abs() < 1e-15);
        let (lo, hi) = (min_value(a.c().values()), max_value(a.c().values()));
        assert!(lo >= -0.02 && hi <= 0.02);
    }

    #[test]
    fn evolve_records_and_conserves() {
        let g = Grid::new(8.0 * std::f64::consts::PI, 64).unwrap();
        let s0 = perturbed_uniform(&g, 0.01, 1).unwrap();
        let mut cfg = SolverConfig::new(2.0, 1e-2);
        cfg.record_every = 0.5;
        let rec = evolve(&s0, &params(), &cfg).unwrap();
        assert!(rec.completed());
        assert_eq!(rec.times.len(), 5);
        assert!((rec.times[4] - 2.0).abs() < 1e-12);
        assert!(rec.volume_drift() <= 1e-12);
        assert!(rec.mass_drift() <= 1e-12);
        assert!(rec.max_energy_increase() <= 1e-8);
        assert!(rec.h_min_series.iter().all(|&v| v > 0.0));
    }
}
