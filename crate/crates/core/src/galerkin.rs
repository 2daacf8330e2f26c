//! Regularized spectral Galerkin system, used as an independent oracle for
//! the grid solver.
//!
//! `h_n = sum eta_i phi_i`, `c_n = sum gamma_i phi_i` in the orthonormal
//! Fourier basis `phi_0 = 1/sqrt(L)`, `phi_{2m-1} = sqrt(2/L) cos(k_m x)`,
//! `phi_{2m} = sqrt(2/L) sin(k_m x)`. With `g = g_eps(h_n)`, `f = g^3`:
//!
//! ```text
//! d eta_j / dt = <J, phi_j,x>
//! M d gamma / dt = <K, phi_x> - <g'(h) c h_t, phi>,   M_ij = <g phi_i phi_j>
//! J = -(f/3) Q,   K = c J - g mu_x
//! mu = c^3 - c - (Cn^2 / g) (g c_x)_x
//! Q  = d/dx(-h_xx / C) + phi_eps'(h) h_x
//!      + (r/Cn^2) [ d/dx(g' (W + Cn^2 c_x^2 / 2)) - mu c_x ]
//! ```
//!
//! `Q` is the gradient of the variational derivative of the regularized
//! energy `F_eps = int h_x^2/(2C) - 3A G_eps(h) + (r/Cn^2) g (W + Cn^2 c_x^2/2)`,
//! so `F_eps` decays wherever `h_n > 0`. There `g' = 1` and `Q` reduces to the
//! grid model's `d/dx(-h_xx/C + phi) + (r/g)(g c_x^2)_x`.
//! Pairings use the trapezoid rule on an overresolved periodic grid.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::linalg::Cholesky;
use crate::model::{EnergyBreakdown, Params, State};
use crate::ode::{ImplicitStepper, NewtonSettings, OdeSystem};
use crate::regularization::RegularizedFamily;
use crate::scalar::{lit, max_abs, min_value, Real};
use crate::timestepper::{RunStatus, SolverConfig, TrajectoryRecord};

/// Value of the `order`-th derivative of basis function `i` at `x`.
fn basis_value<T: Real>(length: T, i: usize, order: usize, x: T) -> T {
    if i == 0 {
        return if order == 0 { T::one() / length.sqrt() } else { T::zero() };
    }
    let m = (i + 1) / 2;
    let k = T::TAU() * T::from_count(m) / length;
    let amp = (lit::<T>(2.0) / length).sqrt() * k.powi(order as i32);
    // d/dx shifts the phase by a quarter period
    let phase = k * x + T::FRAC_PI_2() * T::from_count(order);
    if i % 2 == 1 {
        amp * phase.cos()
    } else {
        amp * phase.sin()
    }
}

/// Wavenumber `lambda_i` of basis function `i` (`-lambda_i^2` is its Laplacian eigenvalue).
pub fn basis_wavenumber<T: Real>(length: T, i: usize) -> T {
    T::TAU() * T::from_count(i.div_ceil(2)) / length
}

fn check_modes(n_modes: usize) -> Result<()> {
    if n_modes == 0 || n_modes % 2 == 0 {
        return Err(Error::InvalidConfig(format!(
            "n_modes must be odd (constant plus cos/sin pairs), got {n_modes}"
        )));
    }
    Ok(())
}

/// Trapezoid-rule coefficients of a sampled periodic field; exact for
/// trigonometric polynomials resolved by the field's grid.
pub fn project<T: Real>(f: &Field<T>, n_modes: usize) -> Result<Vec<T>> {
    check_modes(n_modes)?;
    let g = f.grid();
    let (l, dx) = (g.length(), g.dx());
    Ok((0..n_modes)
        .map(|i| {
            f.values()
                .iter()
                .enumerate()
                .map(|(q, &v)| v * basis_value(l, i, 0, g.x(q)))
                .sum::<T>()
                * dx
        })
        .collect())
}

/// Evaluate an expansion on an arbitrary periodic grid of the same length.
pub fn reconstruct_on<T: Real>(grid: &Grid<T>, coeffs: &[T]) -> Result<Field<T>> {
    check_modes(coeffs.len())?;
    let l = grid.length();
    grid.field_from_fn(|x| {
        coeffs
            .iter()
            .enumerate()
            .map(|(i, &a)| a * basis_value(l, i, 0, x))
            .sum()
    })
}

#[derive(Debug, Clone)]
pub struct GalerkinSystem<T: Real> {
    n_modes: usize,
    family: RegularizedFamily<T>,
    quad: Grid<T>,
    /// `basis[d][[q, i]]`: `d`-th derivative of `phi_i` at quadrature node `q`.
    basis: [Array2<T>; 4],
    pub eta: Vec<T>,
    pub gamma: Vec<T>,
}

/// Pointwise fields at the quadrature nodes.
struct Pointwise<T> {
    g: Vec<T>,
    g1: Vec<T>,
    c: Vec<T>,
    hx: Vec<T>,
    cx: Vec<T>,
    mu_x: Vec<T>,
    q: Vec<T>,
    flux: Vec<T>,
}

impl<T: Real> GalerkinSystem<T> {
    /// Zero coefficients on `[0, length]`; quadrature on `max(4 n_modes, 64)` nodes.
    pub fn new(length: T, n_modes: usize, eps: T) -> Result<Self> {
        check_modes(n_modes)?;
        let family = RegularizedFamily::new(eps)?;
        let nq = (4 * n_modes).max(64).next_multiple_of(2);
        let quad = Grid::new(length, nq)?;
        let basis = std::array::from_fn(|d| {
            Array2::from_shape_fn((nq, n_modes), |(q, i)| basis_value(length, i, d, quad.x(q)))
        });
        Ok(Self {
            n_modes,
            family,
            quad,
            basis,
            eta: vec![T::zero(); n_modes],
            gamma: vec![T::zero(); n_modes],
        })
    }

    /// Project a grid state onto the first `n_modes` basis functions.
    pub fn from_state(s: &State<T>, n_modes: usize, eps: T) -> Result<Self> {
        let mut sys = Self::new(s.grid().length(), n_modes, eps)?;
        sys.eta = project(s.h(), n_modes)?;
        sys.gamma = project(s.c(), n_modes)?;
        Ok(sys)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn eps(&self) -> T {
        self.family.eps()
    }

    pub fn length(&self) -> T {
        self.quad.length()
    }

    pub fn quadrature_grid(&self) -> &Grid<T> {
        &self.quad
    }

    pub fn family(&self) -> &RegularizedFamily<T> {
        &self.family
    }

    /// `d`-th derivative of an expansion at the quadrature nodes.
    pub fn evaluate(&self, coeffs: &[T], d: usize) -> Vec<T> {
        self.basis[d].dot(&ndarray::ArrayView1::from(coeffs)).to_vec()
    }

    /// `<u, phi_i>` (or `<u, phi_i,x>` with `d = 1`) for every `i`.
    fn pair(&self, u: &[T], d: usize) -> Vec<T> {
        let dx = self.quad.dx();
        self.basis[d].t().dot(&ndarray::ArrayView1::from(u)).mapv(|v| v * dx).to_vec()
    }

    /// `(h_n, c_n)` at the quadrature nodes; fails if `h_n` is not positive.
    pub fn to_state(&self) -> Result<State<T>> {
        let g = &self.quad;
        State::new(g.field(self.evaluate(&self.eta, 0))?, g.field(self.evaluate(&self.gamma, 0))?)
    }

    pub fn h_min(&self) -> T {
        min_value(&self.evaluate(&self.eta, 0))
    }

    fn pointwise(&self, eta: &[T], gamma: &[T], p: &Params<T>) -> Result<Pointwise<T>> {
        if p.surface_tension.is_some() {
            return Err(Error::Unsupported(
                "the Galerkin system is implemented for uniform surface tension only".into(),
            ));
        }
        let [h, hx, hxx, hxxx] = std::array::from_fn(|d| self.evaluate(eta, d));
        let [c, cx, cxx, cxxx] = std::array::from_fn(|d| self.evaluate(gamma, d));
        let nq = h.len();
        let cn2 = p.cahn * p.cahn;
        let r_over = p.backreaction / cn2;
        let n = p.vdw_exponent as i32;
        let half = lit::<T>(0.5);
        let mut pw = Pointwise {
            g: vec![T::zero(); nq],
            g1: vec![T::zero(); nq],
            c: c.clone(),
            hx: hx.clone(),
            cx: cx.clone(),
            mu_x: vec![T::zero(); nq],
            q: vec![T::zero(); nq],
            flux: vec![T::zero(); nq],
        };
        for i in 0..nq {
            let d = self.family.g_derivs(h[i]);
            let (g, g1, g2) = (d.g, d.d1, d.d2);
            let (ci, cxi) = (c[i], cx[i]);
            // (g c_x)_x / g and its x-derivative
            let lap = cxx[i] + g1 * hx[i] * cxi / g;
            let lap_x = cxxx[i] + ((g2 * hx[i] * hx[i] + g1 * hxx[i]) * cxi + g1 * hx[i] * cxx[i]) / g
                - g1 * g1 * hx[i] * hx[i] * cxi / (g * g);
            let w1 = ci * ci * ci - ci;
            let mu = w1 - cn2 * lap;
            let mu_x = (lit::<T>(3.0) * ci * ci - T::one()) * cxi - cn2 * lap_x;
            let w = lit::<T>(0.25) * (ci * ci - T::one()).powi(2);
            let bulk = w + half * cn2 * cxi * cxi;
            let bulk_x = w1 * cxi + cn2 * cxi * cxx[i];
            let phi_prime = -T::from_count(n as usize) * p.hamaker * g.powi(-(n + 1));
            let q = -hxxx[i] / p.capillary
                + phi_prime * hx[i]
                + r_over * (g2 * hx[i] * bulk + g1 * bulk_x - mu * cxi);
            pw.g[i] = g;
            pw.g1[i] = g1;
            pw.mu_x[i] = mu_x;
            pw.q[i] = q;
            pw.flux[i] = -g * g * g * q / lit(3.0);
        }
        Ok(pw)
    }

    fn rhs_for(&self, eta: &[T], gamma: &[T], p: &Params<T>) -> Result<(Vec<T>, Vec<T>)> {
        let pw = self.pointwise(eta, gamma, p)?;
        let d_eta = self.pair(&pw.flux, 1);
        let h_t = self.evaluate(&d_eta, 0);
        let nq = pw.g.len();
        let k: Vec<T> = (0..nq).map(|i| pw.c[i] * pw.flux[i] - pw.g[i] * pw.mu_x[i]).collect();
        let back: Vec<T> = (0..nq).map(|i| pw.g1[i] * pw.c[i] * h_t[i]).collect();
        let rhs: Vec<T> = self
            .pair(&k, 1)
            .into_iter()
            .zip(self.pair(&back, 0))
            .map(|(a, b)| a - b)
            .collect();
        let m = self.mass_matrix_for(eta);
        let d_gamma = Cholesky::factor(&m)
            .map_err(|e| Error::Singular(format!("Galerkin mass matrix: {e}")))?
            .solve(&rhs);
        Ok((d_eta, d_gamma))
    }

    fn mass_matrix_for(&self, eta: &[T]) -> Array2<T> {
        let h = self.evaluate(eta, 0);
        let dx = self.quad.dx();
        let b = &self.basis[0];
        let n = self.n_modes;
        let wg: Vec<T> = h.iter().map(|&v| self.family.g(v) * dx).collect();
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v = (0..wg.len()).map(|q| wg[q] * b[[q, i]] * b[[q, j]]).sum::<T>();
                m[[i, j]] = v;
                m[[j, i]] = v;
            }
        }
        m
    }
}

/// `M_ij = <g_eps(h_n) phi_i, phi_j>` for the given height coefficients.
pub fn mass_matrix<T: Real>(eta: &[T], sys: &GalerkinSystem<T>) -> Result<Array2<T>> {
    if eta.len() != sys.n_modes {
        return Err(Error::LengthMismatch { expected: sys.n_modes, found: eta.len() });
    }
    Ok(sys.mass_matrix_for(eta))
}

/// Coefficient time derivatives `(d eta, d gamma)` at the system's current state.
pub fn galerkin_rhs<T: Real>(sys: &GalerkinSystem<T>, p: &Params<T>) -> Result<(Vec<T>, Vec<T>)> {
    p.validate()?;
    sys.rhs_for(&sys.eta, &sys.gamma, p)
}

/// Regularized energy `F_eps` and its dissipation integrals
/// `D_film = (1/3) int f Q^2`, `D_diff = (r/Cn^2) int g mu_x^2`.
pub fn regularized_energy<T: Real>(sys: &GalerkinSystem<T>, p: &Params<T>) -> Result<EnergyBreakdown<T>> {
    if p.vdw_exponent != 3 {
        return Err(Error::Unsupported("the regularized energy is defined for the h^-3 potential".into()));
    }
    let pw = sys.pointwise(&sys.eta, &sys.gamma, p)?;
    let h = sys.evaluate(&sys.eta, 0);
    let cn2 = p.cahn * p.cahn;
    let r_over = p.backreaction / cn2;
    let half = lit::<T>(0.5);
    let dx = sys.quad.dx();
    let (mut f1, mut f2, mut d1, mut d2) = (T::zero(), T::zero(), T::zero(), T::zero());
    for i in 0..h.len() {
        let big_g = sys.family.G(h[i])?;
        f1 = f1 + half / p.capillary * pw.hx[i] * pw.hx[i] - lit::<T>(3.0) * p.hamaker * big_g;
        let c = pw.c[i];
        let w = lit::<T>(0.25) * (c * c - T::one()).powi(2);
        f2 = f2 + pw.g[i] * (w + half * cn2 * pw.cx[i] * pw.cx[i]);
        d1 = d1 + pw.g[i].powi(3) * pw.q[i] * pw.q[i] / lit(3.0);
        d2 = d2 + pw.g[i] * pw.mu_x[i] * pw.mu_x[i];
    }
    let (f1, f2) = (f1 * dx, r_over * f2 * dx);
    Ok(EnergyBreakdown {
        f1,
        f2,
        total: f1 + f2,
        d_film: d1 * dx,
        d_diff: r_over * d2 * dx,
        marangoni_power: T::zero(),
        lyapunov: p.has_lyapunov_functional(),
    })
}

struct Dynamics<'a, T: Real> {
    sys: &'a GalerkinSystem<T>,
    params: &'a Params<T>,
}

impl<T: Real> OdeSystem<T> for Dynamics<'_, T> {
    fn dim(&self) -> usize {
        2 * self.sys.n_modes
    }

    fn rhs(&self, y: &[T]) -> Result<Vec<T>> {
        let (eta, gamma) = y.split_at(self.sys.n_modes);
        let (a, b) = self.sys.rhs_for(eta, gamma, self.params)?;
        Ok([a, b].concat())
    }
}

/// Integrate the coefficient ODEs with the BDF2/Newton machinery (fixed step
/// `dt_init`, halved on Newton failure). States are recorded on the
/// quadrature grid; the run aborts if `h_n` loses positivity.
pub fn evolve_galerkin<T: Real>(
    sys: &GalerkinSystem<T>,
    p: &Params<T>,
    cfg: &SolverConfig<T>,
) -> Result<TrajectoryRecord<T>> {
    cfg.validate()?;
    p.validate()?;
    let s0 = sys.to_state()?;
    let mut rec = TrajectoryRecord::new();
    rec.h_min_observed = s0.h_min();
    rec.push(T::zero(), s0, regularized_energy(sys, p)?);
    let dynamics = Dynamics { sys, params: p };
    let mut stepper = ImplicitStepper::new();
    let newton = NewtonSettings { tol: cfg.newton_tol, max_iter: cfg.newton_max_iter };
    let mut y = [sys.eta.clone(), sys.gamma.clone()].concat();
    let mut history: Option<(Vec<T>, T)> = None;
    let mut work = sys.clone();
    let mut t = T::zero();
    let mut dt = cfg.dt_init;
    let mut next_record = cfg.record_every.min(cfg.t_end);
    let tiny = cfg.t_end * lit(1e-12);
    while t < cfg.t_end - tiny {
        let step_dt = dt.min(next_record - t);
        let hist = history
            .as_ref()
            .filter(|(_, d)| step_dt <= *d * lit(2.0))
            .map(|(v, d)| (v.as_slice(), *d));
        match stepper.step(&dynamics, &y, hist, step_dt, newton) {
            Ok(out) => {
                rec.step_stats.accepted += 1;
                history = Some((std::mem::replace(&mut y, out.y), step_dt));
                t = t + step_dt;
                let n = sys.n_modes;
                work.eta.copy_from_slice(&y[..n]);
                work.gamma.copy_from_slice(&y[n..]);
                let hmin = work.h_min();
                rec.h_min_observed = rec.h_min_observed.min(hmin);
                if !(hmin > T::zero()) || max_abs(&y).is_nan() {
                    rec.status = RunStatus::Aborted(format!("h_n lost positivity at t = {t} (min {hmin})"));
                    break;
                }
                if t >= next_record - tiny {
                    rec.push(t, work.to_state()?, regularized_energy(&work, p)?);
                    next_record = (next_record + cfg.record_every).min(cfg.t_end);
                }
            }
            Err(err) => {
                rec.step_stats.rejected += 1;
                rec.step_stats.newton_failures += 1;
                stepper.reset();
                dt = dt / lit(2.0);
                if dt < cfg.dt_min {
                    rec.status = RunStatus::Aborted(format!("ODE step failed below dt_min at t = {t}: {err}"));
                    break;
                }
            }
        }
    }
    Ok(rec)
}
