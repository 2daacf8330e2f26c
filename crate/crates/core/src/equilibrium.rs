//! Single-front equilibria on `[-X, X]` (lengths in units of `Cn`):
//!
//! ```text
//! h'' / C = |A| Cn^2 (1 - h^-3) + r [ (c^2 - 1)^2 / 4 + c'^2 / 2 ]
//! c''     = c^3 - c - (h'/h) c'
//! h(+-X) = 1,  c(-X) = -1,  c(X) = 1
//! ```
//!
//! Centered finite differences of configurable even order on a uniform grid
//! (stencil nodes beyond the ends take the Dirichlet values), damped Newton
//! with a banded Jacobian, and continuation in `r` from the exact decoupled
//! solution `h = 1`, `c = tanh(x / sqrt 2)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::BandMatrix;
use crate::model::Params;
use crate::scalar::{lit, max_abs, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct BvpConfig<T> {
    /// Half width `X` of the truncated domain.
    pub half_width: T,
    pub n_points: usize,
    pub newton_tol: T,
    pub max_iter: usize,
    /// Warm-start ladder of `r` values; `None` picks one automatically.
    pub continuation: Option<Vec<T>>,
    /// Even order of the centered difference stencils.
    pub fd_order: usize,
}

impl<T: Real> Default for BvpConfig<T> {
    fn default() -> Self {
        Self {
            half_width: lit(40.0),
            n_points: 1601,
            newton_tol: lit(1e-12),
            max_iter: 50,
            continuation: None,
            fd_order: 8,
        }
    }
}

impl<T: Real> BvpConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.half_width >= lit(10.0)) || !self.half_width.is_finite() {
            return bad(format!("half_width must be at least 10, got {}", self.half_width));
        }
        if self.n_points < 201 || self.n_points % 2 == 0 {
            return bad(format!("n_points must be odd and at least 201, got {}", self.n_points));
        }
        if self.fd_order < 2 || self.fd_order % 2 == 1 || self.fd_order > 16 {
            return bad(format!("fd_order must be even in 2..=16, got {}", self.fd_order));
        }
        if !(self.newton_tol > T::zero()) || self.max_iter == 0 {
            return bad("newton_tol must be positive and max_iter at least 1".into());
        }
        if let Some(steps) = &self.continuation {
            if steps.iter().any(|r| !(*r >= T::zero()) || !r.is_finite()) {
                return bad("continuation values must be finite and nonnegative".into());
            }
        }
        Ok(())
    }

    pub fn dx(&self) -> T {
        lit::<T>(2.0) * self.half_width / T::from_count(self.n_points - 1)
    }
}

/// Finite-difference weights for derivatives `0..=m` at `x0` (Fornberg's recursion).
pub fn fd_weights<T: Real>(x0: T, nodes: &[T], m: usize) -> Vec<Vec<T>> {
    let n = nodes.len();
    let mut w = vec![vec![T::zero(); n]; m + 1];
    w[0][0] = T::one();
    let mut c1 = T::one();
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = T::one();
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 = c2 * c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    w[k][i] = c1 * (T::from_count(k) * w[k - 1][i - 1] - c5 * w[k][i - 1]) / c2;
                }
                w[0][i] = -c1 * c5 * w[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                w[k][j] = (c4 * w[k][j] - T::from_count(k) * w[k - 1][j]) / c3;
            }
            w[0][j] = c4 * w[0][j] / c3;
        }
        c1 = c2;
    }
    w
}

/// Centered stencils on a uniform grid, with out-of-range nodes clamped to the end values.
#[derive(Debug, Clone)]
struct Stencil<T> {
    half: usize,
    d1: Vec<T>,
    d2: Vec<T>,
}

impl<T: Real> Stencil<T> {
    fn new(order: usize, dx: T) -> Self {
        let half = order / 2;
        let nodes: Vec<T> = (0..=2 * half).map(|j| T::from_count(j) - T::from_count(half)).collect();
        let w = fd_weights(T::zero(), &nodes, 2);
        Self {
            half,
            d1: w[1].iter().map(|&v| v / dx).collect(),
            d2: w[2].iter().map(|&v| v / (dx * dx)).collect(),
        }
    }

    /// Node index for stencil slot `j` around `i`, or `None` when it is a ghost node.
    fn node(&self, i: usize, j: usize, n: usize) -> Option<usize> {
        let k = i as isize + j as isize - self.half as isize;
        (0..n as isize).contains(&k).then_some(k as usize)
    }

    /// `(f', f'')` at node `i`; ghost nodes take `left` / `right`.
    fn apply(&self, f: &[T], i: usize, left: T, right: T) -> (T, T) {
        let n = f.len();
        let mut a = T::zero();
        let mut b = T::zero();
        for j in 0..self.d1.len() {
            let v = match self.node(i, j, n) {
                Some(k) => f[k],
                None if j < self.half => left,
                None => right,
            };
            a = a + self.d1[j] * v;
            b = b + self.d2[j] * v;
        }
        (a, b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumProfile<T> {
    pub x: Vec<T>,
    pub h: Vec<T>,
    pub c: Vec<T>,
    pub h_min: T,
    /// Distance over which `c` rises from -0.9 to 0.9.
    pub interface_width: T,
    pub max_grad_c: T,
    /// Infinity norm of both discrete equations.
    pub residual_norm: T,
    pub iterations: usize,
    /// `h'(-X), h'(X), c'(-X), c'(X)` by one-sided differences.
    pub end_slopes: [T; 4],
    pub fd_order: usize,
}

impl<T: Real> EquilibriumProfile<T> {
    /// Build a profile (and its diagnostics) from samples on `[-X, X]`.
    pub fn from_samples(half_width: T, h: Vec<T>, c: Vec<T>, p: &Params<T>, fd_order: usize) -> Result<Self> {
        let n = h.len();
        if c.len() != n {
            return Err(Error::LengthMismatch { expected: n, found: c.len() });
        }
        let cfg = BvpConfig { half_width, n_points: n, fd_order, ..BvpConfig::default() };
        cfg.validate()?;
        let st = Stencil::new(fd_order, cfg.dx());
        let mut y = vec![T::zero(); 2 * (n - 2)];
        for i in 1..n - 1 {
            y[2 * (i - 1)] = h[i];
            y[2 * (i - 1) + 1] = c[i];
        }
        let res = residual(&y, p, &st, n, false);
        Ok(profile(&cfg, &st, &y, max_abs(&res), 0))
    }

    pub fn max_end_slope(&self) -> T {
        self.end_slopes.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn dx(&self) -> T {
        self.x[1] - self.x[0]
    }
}

fn unpack<T: Real>(y: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    let mut h = vec![T::one(); n];
    let mut c = vec![T::zero(); n];
    c[0] = -T::one();
    c[n - 1] = T::one();
    for i in 1..n - 1 {
        h[i] = y[2 * (i - 1)];
        c[i] = y[2 * (i - 1) + 1];
    }
    (h, c)
}

/// Discrete equations at the interior nodes. With `pinned` the concentration
/// equation at the centre node is replaced by `c = 0`: a front on a long
/// interval is translation invariant up to exponentially small terms, which
/// leaves the unpinned Jacobian numerically singular.
fn residual<T: Real>(y: &[T], p: &Params<T>, st: &Stencil<T>, n: usize, pinned: bool) -> Vec<T> {
    let (h, c) = unpack(y, n);
    let (inv_c, a_cn2, r) = (T::one() / p.capillary, p.a_abs() * p.cahn * p.cahn, p.backreaction);
    let quarter = lit::<T>(0.25);
    let half = lit::<T>(0.5);
    let mut out = vec![T::zero(); y.len()];
    for i in 1..n - 1 {
        let (h1, h2) = st.apply(&h, i, T::one(), T::one());
        let (c1, c2) = st.apply(&c, i, -T::one(), T::one());
        let (hi, ci) = (h[i], c[i]);
        out[2 * (i - 1)] = inv_c * h2
            - a_cn2 * (T::one() - hi.powi(-3))
            - r * (quarter * (ci * ci - T::one()).powi(2) + half * c1 * c1);
        out[2 * (i - 1) + 1] = c2 - (ci * ci * ci - ci) + h1 / hi * c1;
    }
    if pinned {
        out[2 * (n / 2 - 1) + 1] = c[n / 2];
    }
    out
}

fn jacobian<T: Real>(y: &[T], p: &Params<T>, st: &Stencil<T>, n: usize) -> BandMatrix<T> {
    let (h, c) = unpack(y, n);
    let (inv_c, a_cn2, r) = (T::one() / p.capillary, p.a_abs() * p.cahn * p.cahn, p.backreaction);
    let band = 2 * st.half + 1;
    let mut jac = BandMatrix::zeros(y.len(), band, band);
    let three = lit::<T>(3.0);
    for i in 1..n - 1 {
        let (h1, _) = st.apply(&h, i, T::one(), T::one());
        let (c1, _) = st.apply(&c, i, -T::one(), T::one());
        let (hi, ci) = (h[i], c[i]);
        let (rh, rc) = (2 * (i - 1), 2 * (i - 1) + 1);
        if i == n / 2 {
            jac.add(rc, rc, T::one());
        }
        for j in 0..st.d1.len() {
            let Some(k) = st.node(i, j, n) else { continue };
            if k == 0 || k == n - 1 {
                continue;
            }
            let (uh, uc) = (2 * (k - 1), 2 * (k - 1) + 1);
            let (w1, w2) = (st.d1[j], st.d2[j]);
            jac.add(rh, uh, inv_c * w2);
            jac.add(rh, uc, -r * c1 * w1);
            if i != n / 2 {
                jac.add(rc, uc, w2 + h1 / hi * w1);
                jac.add(rc, uh, c1 / hi * w1);
            }
        }
        jac.add(rh, rh, -three * a_cn2 * hi.powi(-4));
        jac.add(rh, rc, -r * (ci * ci - T::one()) * ci);
        if i != n / 2 {
            jac.add(rc, rc, -(three * ci * ci - T::one()));
            jac.add(rc, rh, -h1 * c1 / (hi * hi));
        }
    }
    jac
}

fn profile<T: Real>(cfg: &BvpConfig<T>, st: &Stencil<T>, y: &[T], res: T, iterations: usize) -> EquilibriumProfile<T> {
    let n = cfg.n_points;
    let dx = cfg.dx();
    let x: Vec<T> = (0..n).map(|i| -cfg.half_width + dx * T::from_count(i)).collect();
    let (h, c) = unpack(y, n);
    let h_min = h.iter().copied().fold(T::infinity(), T::min);
    let max_grad_c = (0..n)
        .map(|i| st.apply(&c, i, -T::one(), T::one()).0.abs())
        .fold(T::zero(), T::max);
    let crossing = |level: T| -> T {
        for i in 0..n - 1 {
            if (c[i] - level) * (c[i + 1] - level) <= T::zero() && c[i] != c[i + 1] {
                return x[i] + (level - c[i]) / (c[i + 1] - c[i]) * dx;
            }
        }
        T::nan()
    };
    let interface_width = crossing(lit(0.9)) - crossing(lit(-0.9));
    // fourth-order one-sided differences at both ends
    let w = [lit::<T>(25.0), lit(-48.0), lit(36.0), lit(-16.0), lit(3.0)];
    let twelve = lit::<T>(12.0) * dx;
    let left = |f: &[T]| -(0..5).map(|k| w[k] * f[k]).sum::<T>() / twelve;
    let right = |f: &[T]| (0..5).map(|k| w[k] * f[n - 1 - k]).sum::<T>() / twelve;
    EquilibriumProfile {
        end_slopes: [left(&h), right(&h), left(&c), right(&c)],
        x,
        h,
        c,
        h_min,
        interface_width,
        max_grad_c,
        residual_norm: res,
        iterations,
        fd_order: cfg.fd_order,
    }
}

/// Damped Newton from `y`; returns the converged unknowns, residual and iteration count.
fn newton<T: Real>(mut y: Vec<T>, p: &Params<T>, st: &Stencil<T>, cfg: &BvpConfig<T>) -> Result<(Vec<T>, T, usize)> {
    let n = cfg.n_points;
    let mut res = residual(&y, p, st, n, true);
    let mut norm = max_abs(&res);
    for it in 0..cfg.max_iter {
        if norm <= cfg.newton_tol {
            return Ok((y, norm, it));
        }
        let mut jac = jacobian(&y, p, st, n);
        jac.factor()?;
        let delta = jac.solve(&res);
        let mut lambda = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<T> = y.iter().zip(&delta).map(|(&a, &d)| a - lambda * d).collect();
            let positive = trial.iter().step_by(2).all(|&h| h > T::zero());
            if positive {
                let r_trial = residual(&trial, p, st, n, true);
                let n_trial = max_abs(&r_trial);
                if n_trial.is_finite() && (n_trial < norm || n_trial <= cfg.newton_tol) {
                    y = trial;
                    res = r_trial;
                    norm = n_trial;
                    accepted = true;
                    break;
                }
            }
            lambda = lambda / lit(2.0);
        }
        if !accepted {
            // the residual sits at roundoff level when the full step cannot improve it
            if norm <= lit::<T>(10.0) * cfg.newton_tol {
                return Ok((y, norm, it));
            }
            return Err(Error::NewtonDivergence { iterations: it, residual: norm.to_f64_lossy() });
        }
    }
    if norm <= cfg.newton_tol {
        return Ok((y, norm, cfg.max_iter));
    }
    Err(Error::NewtonDivergence { iterations: cfg.max_iter, residual: norm.to_f64_lossy() })
}

/// Default warm-start ladder below `target`: 1, 2, 5, 10, then steps of 5.
fn default_ladder<T: Real>(target: T) -> Vec<T> {
    let mut ladder: Vec<T> = [1.0, 2.0, 5.0, 10.0].iter().map(|&v| lit::<T>(v)).collect();
    let mut r = lit::<T>(15.0);
    while r < target {
        ladder.push(r);
        r = r + lit(5.0);
    }
    ladder.retain(|&v| v < target);
    ladder
}

/// Solve the equilibrium problem for `p`. A direct Newton solve from the
/// decoupled profile is tried first; on divergence the solve is repeated
/// along the continuation ladder in `r`.
pub fn solve_bvp<T: Real>(p: &Params<T>, cfg: &BvpConfig<T>) -> Result<EquilibriumProfile<T>> {
    cfg.validate()?;
    p.validate()?;
    if !(p.a_abs() > T::zero()) {
        return Err(Error::InvalidParams("the equilibrium problem needs |A| > 0".into()));
    }
    let n = cfg.n_points;
    let st = Stencil::new(cfg.fd_order, cfg.dx());
    let dx = cfg.dx();
    let mut y0 = vec![T::zero(); 2 * (n - 2)];
    for i in 1..n - 1 {
        let x = -cfg.half_width + dx * T::from_count(i);
        y0[2 * (i - 1)] = T::one();
        y0[2 * (i - 1) + 1] = (x / T::SQRT_2()).tanh();
    }
    let ladder = match &cfg.continuation {
        Some(v) => v.iter().copied().filter(|&r| r < p.backreaction).collect(),
        None => default_ladder(p.backreaction),
    };
    let direct = if cfg.continuation.is_none() {
        newton(y0.clone(), p, &st, cfg).ok()
    } else {
        None
    };
    let (y, _, iters) = match direct {
        Some(v) => v,
        None => {
            let mut y = y0;
            let mut total = 0;
            for &r in &ladder {
                let mut q = p.clone();
                q.backreaction = r;
                let (next, _, it) = newton(y, &q, &st, cfg)?;
                y = next;
                total += it;
            }
            let (y, res, it) = newton(y, p, &st, cfg)?;
            (y, res, total + it)
        }
    };
    let full = max_abs(&residual(&y, p, &st, n, false));
    Ok(profile(cfg, &st, &y, full, iters))
}

/// `F_cap = -r h^-1 (h c_x^2)_x` and `F_VdW = |A| (h^-3)_x` on the profile grid.
pub fn forces<T: Real>(prof: &EquilibriumProfile<T>, p: &Params<T>) -> (Vec<T>, Vec<T>) {
    let n = prof.h.len();
    let st = Stencil::new(prof.fd_order, prof.dx());
    let two = lit::<T>(2.0);
    let mut cap = Vec::with_capacity(n);
    let mut vdw = Vec::with_capacity(n);
    for i in 0..n {
        let (h1, _) = st.apply(&prof.h, i, prof.h[0], prof.h[n - 1]);
        let (c1, c2) = st.apply(&prof.c, i, prof.c[0], prof.c[n - 1]);
        let h = prof.h[i];
        // (h c_x^2)_x = h_x c_x^2 + 2 h c_x c_xx
        cap.push(-p.backreaction / h * (h1 * c1 * c1 + two * h * c1 * c2));
        vdw.push(-lit::<T>(3.0) * p.a_abs() * h.powi(-4) * h1);
    }
    (cap, vdw)
}

/// Parameter varied by a dip sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepParam<T> {
    /// Values of `|A|` (the Hamaker constant is set to `-|A|`).
    Hamaker(Vec<T>),
    Backreaction(Vec<T>),
}

impl<T: Real> SweepParam<T> {
    pub fn values(&self) -> &[T] {
        match self {
            SweepParam::Hamaker(v) | SweepParam::Backreaction(v) => v,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::Hamaker(_) => "A_abs",
            SweepParam::Backreaction(_) => "r",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<T> {
    pub value: T,
    pub h_min: T,
    pub max_grad_c: T,
    pub residual: T,
    pub iterations: usize,
    /// `None` when the solve converged.
    pub error: Option<String>,
}

/// Solve at every sweep value in parallel; failed points are flagged and the sweep continues.
pub fn sweep_dip<T: Real>(p_base: &Params<T>, vary: &SweepParam<T>, cfg: &BvpConfig<T>) -> Result<Vec<SweepRow<T>>> {
    cfg.validate()?;
    if vary.values().iter().any(|v| !(*v > T::zero()) || !v.is_finite()) {
        return Err(Error::InvalidConfig("sweep values must be positive".into()));
    }
    let rows = vary
        .values()
        .par_iter()
        .map(|&v| {
            let mut p = p_base.clone();
            match vary {
                SweepParam::Hamaker(_) => p.hamaker = -v,
                SweepParam::Backreaction(_) => p.backreaction = v,
            }
            match solve_bvp(&p, cfg) {
                Ok(prof) => SweepRow {
                    value: v,
                    h_min: prof.h_min,
                    max_grad_c: prof.max_grad_c,
                    residual: prof.residual_norm,
                    iterations: prof.iterations,
                    error: None,
                },
                Err(e) => SweepRow {
                    value: v,
                    h_min: T::nan(),
                    max_grad_c: T::nan(),
                    residual: T::nan(),
                    iterations: 0,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    StrictlyIncreasing,
    StrictlyDecreasing,
    Neither,
}

impl Trend {
    pub fn name(self) -> &'static str {
        match self {
            Trend::StrictlyIncreasing => "strictly_increasing",
            Trend::StrictlyDecreasing => "strictly_decreasing",
            Trend::Neither => "neither",
        }
    }
}

/// Monotonicity of a sequence (failed rows, NaN, break it).
pub fn trend<T: Real>(v: &[T]) -> Trend {
    if v.len() >= 2 && v.windows(2).all(|w| w[1] > w[0]) {
        Trend::StrictlyIncreasing
    } else if v.len() >= 2 && v.windows(2).all(|w| w[1] < w[0]) {
        Trend::StrictlyDecreasing
    } else {
        Trend::Neither
    }
}
