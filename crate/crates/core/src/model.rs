//! Thin-film Stokes Cahn-Hilliard physics on the periodic grid.
//!
//! ```text
//! h_t + J_x = 0
//! (c h)_t + (J c)_x = (h mu_x)_x
//! J  = h^2 sigma_x / 2 - h^3/3 { d/dx(-h_xx / C + phi) + (r/h) d/dx(h c_x^2) }
//! mu = c^3 - c - (Cn^2 / h) d/dx(h c_x)
//! phi = A h^-n
//! ```
//!
//! With `A <= 0` and uniform surface tension the functional `F = F1 + F2`,
//!
//! ```text
//! F1 = int h_x^2 / (2C) + |A| / (2 h^2)
//! F2 = (r / Cn^2) int h [ (c^2 - 1)^2 / 4 + Cn^2 c_x^2 / 2 ]
//! ```
//!
//! decays at the rate `D_film + D_diff` with `D_film = (1/3) int h^3 Q^2`,
//! `D_diff = (r/Cn^2) int h mu_x^2` and `Q` the braces in `J`.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::quad::simpson_samples;
use crate::scalar::{lit, max_value, min_value, Real};

/// Prescribed static surface tension profile and its derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceTension<T: Real> {
    sigma: Field<T>,
    sigma_x: Field<T>,
}

impl<T: Real> SurfaceTension<T> {
    pub fn new(sigma: Field<T>) -> Result<Self> {
        let sigma_x = sigma.deriv(1)?;
        Ok(Self { sigma, sigma_x })
    }

    pub fn sigma(&self) -> &Field<T> {
        &self.sigma
    }

    pub fn sigma_x(&self) -> &Field<T> {
        &self.sigma_x
    }
}

/// Dimensionless model constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T: Real> {
    /// Capillary number `C > 0`.
    pub capillary: T,
    /// Cahn number `Cn > 0`, the scaled interface thickness.
    pub cahn: T,
    /// Backreaction strength `r >= 0`.
    pub backreaction: T,
    /// Hamaker constant `A`; negative is repulsive.
    pub hamaker: T,
    /// Exponent `n` of `phi = A h^-n`.
    pub vdw_exponent: u32,
    /// `None` means uniform surface tension.
    pub surface_tension: Option<SurfaceTension<T>>,
}

impl<T: Real> Params<T> {
    pub fn new(capillary: T, cahn: T, backreaction: T, hamaker: T) -> Result<Self> {
        let p = Self {
            capillary,
            cahn,
            backreaction,
            hamaker,
            vdw_exponent: 3,
            surface_tension: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// `C = 1/3, r = Cn = 1, A = -1`, the point where the existence analysis is set.
    pub fn scaled_point() -> Self {
        Self::new(T::one() / lit(3.0), T::one(), T::one(), -T::one()).expect("valid constants")
    }

    pub fn with_vdw_exponent(mut self, n: u32) -> Result<Self> {
        self.vdw_exponent = n;
        self.validate()?;
        Ok(self)
    }

    pub fn with_surface_tension(mut self, sigma: Field<T>) -> Result<Self> {
        self.surface_tension = Some(SurfaceTension::new(sigma)?);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.capillary > T::zero() && self.capillary.is_finite()) {
            return bad(format!("capillary number must be positive, got {}", self.capillary));
        }
        if !(self.cahn > T::zero() && self.cahn.is_finite()) {
            return bad(format!("Cahn number must be positive, got {}", self.cahn));
        }
        if !(self.backreaction >= T::zero() && self.backreaction.is_finite()) {
            return bad(format!("backreaction must be nonnegative, got {}", self.backreaction));
        }
        if !self.hamaker.is_finite() {
            return bad(format!("Hamaker constant must be finite, got {}", self.hamaker));
        }
        if self.vdw_exponent < 1 {
            return bad("Van der Waals exponent must be at least 1".into());
        }
        Ok(())
    }

    pub fn a_abs(&self) -> T {
        self.hamaker.abs()
    }

    pub fn is_repulsive(&self) -> bool {
        self.hamaker <= T::zero()
    }

    /// True when `F` is a Lyapunov functional: repulsive (or absent) VdW and uniform tension.
    pub fn has_lyapunov_functional(&self) -> bool {
        self.is_repulsive() && self.surface_tension.is_none()
    }

    fn sigma_x_on(&self, grid: &Grid<T>) -> Result<Option<&[T]>> {
        match &self.surface_tension {
            None => Ok(None),
            Some(st) if st.sigma_x.grid() == grid => Ok(Some(st.sigma_x.values())),
            Some(_) => Err(Error::GridMismatch),
        }
    }

    /// `phi(h) = A h^-n`.
    pub fn phi(&self, h: T) -> T {
        self.hamaker * h.powi(-(self.vdw_exponent as i32))
    }

    /// `dphi/dh = -n A h^-(n+1)`.
    pub fn phi_prime(&self, h: T) -> T {
        let n = self.vdw_exponent as i32;
        -T::from_count(n as usize) * self.hamaker * h.powi(-(n + 1))
    }

    /// Potential energy density `V(h)` with `V'(h) = phi(h)`, so the
    /// variational derivative of `F1` is `-h_xx / C + phi`.
    fn potential_density(&self, h: T) -> T {
        let n = self.vdw_exponent;
        if n == 1 {
            self.hamaker * h.ln()
        } else {
            let m = T::from_count(n as usize - 1);
            -self.hamaker * h.powi(-(n as i32 - 1)) / m
        }
    }
}

/// Film height and concentration at one instant; `min(h) > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct State<T: Real> {
    h: Field<T>,
    c: Field<T>,
}

pub(crate) fn check_positive<T: Real>(h: &[T]) -> Result<()> {
    match h.iter().position(|&v| !(v > T::zero())) {
        Some(index) => Err(Error::NonPositiveHeight {
            index,
            value: h[index].to_f64_lossy(),
        }),
        None => Ok(()),
    }
}

impl<T: Real> State<T> {
    pub fn new(h: Field<T>, c: Field<T>) -> Result<Self> {
        if h.grid() != c.grid() {
            return Err(Error::GridMismatch);
        }
        check_positive(h.values())?;
        Ok(Self { h, c })
    }

    pub fn uniform(grid: &Grid<T>, h: T, c: T) -> Result<Self> {
        Self::new(grid.constant(h)?, grid.constant(c)?)
    }

    pub fn h(&self) -> &Field<T> {
        &self.h
    }

    pub fn c(&self) -> &Field<T> {
        &self.c
    }

    pub fn grid(&self) -> &Grid<T> {
        self.h.grid()
    }

    pub fn h_min(&self) -> T {
        self.h.min()
    }

    /// `int h dx`
    pub fn volume(&self) -> T {
        self.h.integrate()
    }

    /// `int c h dx`
    pub fn mass(&self) -> T {
        let g = self.grid();
        g.integrate_values(&self.ch())
    }

    pub(crate) fn ch(&self) -> Vec<T> {
        self.h.values().iter().zip(self.c.values()).map(|(&h, &c)| h * c).collect()
    }
}

/// Energy, its two parts, and the two dissipation integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown<T> {
    pub f1: T,
    pub f2: T,
    pub total: T,
    pub d_film: T,
    pub d_diff: T,
    /// `(1/2) int h^2 sigma_x Q`, the Marangoni power input (zero for uniform tension).
    pub marangoni_power: T,
    /// False for attractive VdW or nonuniform tension, where `F` need not decay.
    pub lyapunov: bool,
}

impl<T: Real> EnergyBreakdown<T> {
    pub fn dissipation(&self) -> T {
        self.d_film + self.d_diff
    }

    /// `dF/dt` implied by the dissipation identity.
    pub fn predicted_rate(&self) -> T {
        self.marangoni_power - self.dissipation()
    }
}

/// Every pointwise quantity needed by the flux, the right-hand side and the energy.
pub(crate) struct Kinematics<T> {
    pub hx: Vec<T>,
    pub cx: Vec<T>,
    pub mu_x: Vec<T>,
    /// Braces of the flux: `d/dx(-h_xx/C + phi) + (r/h) d/dx(h c_x^2)`.
    pub q: Vec<T>,
    pub flux: Vec<T>,
}

pub(crate) fn chemical_potential_values<T: Real>(
    grid: &Grid<T>,
    h: &[T],
    c: &[T],
    p: &Params<T>,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let [cx, cxx] = grid.spectral_derivs(c, [1, 2]);
    let hx = grid.spectral_deriv(h, 1);
    let cn2 = p.cahn * p.cahn;
    let mu = (0..h.len())
        .map(|i| c[i] * c[i] * c[i] - c[i] - cn2 * (cxx[i] + hx[i] * cx[i] / h[i]))
        .collect();
    (mu, cx, hx)
}

pub(crate) fn kinematics<T: Real>(grid: &Grid<T>, h: &[T], c: &[T], p: &Params<T>) -> Result<Kinematics<T>> {
    let n = h.len();
    let sigma_x = p.sigma_x_on(grid)?;
    let [hx, _hxx, hxxx] = grid.spectral_derivs(h, [1, 2, 3]);
    let [cx, cxx] = grid.spectral_derivs(c, [1, 2]);
    let cn2 = p.cahn * p.cahn;
    let inv_c = T::one() / p.capillary;
    let third = T::one() / lit(3.0);
    let half = lit::<T>(0.5);
    let mut mu = vec![T::zero(); n];
    let mut q = vec![T::zero(); n];
    let mut flux = vec![T::zero(); n];
    for i in 0..n {
        let (hi, ci) = (h[i], c[i]);
        mu[i] = ci * ci * ci - ci - cn2 * (cxx[i] + hx[i] * cx[i] / hi);
        // d/dx(h c_x^2) = h_x c_x^2 + 2 h c_x c_xx
        let s_x = hx[i] * cx[i] * cx[i] + lit::<T>(2.0) * hi * cx[i] * cxx[i];
        q[i] = -inv_c * hxxx[i] + p.phi_prime(hi) * hx[i] + p.backreaction / hi * s_x;
        let marangoni = sigma_x.map_or(T::zero(), |s| half * hi * hi * s[i]);
        flux[i] = marangoni - third * hi * hi * hi * q[i];
    }
    let mu_x = grid.spectral_deriv(&mu, 1);
    Ok(Kinematics { hx, cx, mu_x, q, flux })
}

/// Time derivatives of `h` and `q = c h` from raw samples. Both are exact
/// spectral divergences, so their zero modes vanish.
pub(crate) fn rhs_values<T: Real>(grid: &Grid<T>, h: &[T], c: &[T], p: &Params<T>) -> Result<(Vec<T>, Vec<T>)> {
    let k = kinematics(grid, h, c, p)?;
    let n = h.len();
    let dh = grid.spectral_deriv(&k.flux, 1).into_iter().map(|v| -v).collect();
    let flux_c: Vec<T> = (0..n).map(|i| k.flux[i] * c[i] - h[i] * k.mu_x[i]).collect();
    let dq = grid.spectral_deriv(&flux_c, 1).into_iter().map(|v| -v).collect();
    Ok((dh, dq))
}

pub(crate) fn energy_values<T: Real>(grid: &Grid<T>, h: &[T], c: &[T], p: &Params<T>) -> Result<EnergyBreakdown<T>> {
    let k = kinematics(grid, h, c, p)?;
    let sigma_x = p.sigma_x_on(grid)?;
    let n = h.len();
    let cn2 = p.cahn * p.cahn;
    let half = lit::<T>(0.5);
    let quarter = lit::<T>(0.25);
    let mut e1 = Vec::with_capacity(n);
    let mut e2 = Vec::with_capacity(n);
    let mut d1 = Vec::with_capacity(n);
    let mut d2 = Vec::with_capacity(n);
    let mut mp = Vec::with_capacity(n);
    for i in 0..n {
        let (hi, ci) = (h[i], c[i]);
        e1.push(half / p.capillary * k.hx[i] * k.hx[i] + p.potential_density(hi));
        let w = quarter * (ci * ci - T::one()).powi(2);
        e2.push(hi * (w + half * cn2 * k.cx[i] * k.cx[i]));
        d1.push(hi * hi * hi * k.q[i] * k.q[i] / lit(3.0));
        d2.push(hi * k.mu_x[i] * k.mu_x[i]);
        mp.push(sigma_x.map_or(T::zero(), |s| half * hi * hi * s[i] * k.q[i]));
    }
    let r_over = p.backreaction / cn2;
    let f1 = grid.integrate_values(&e1);
    let f2 = r_over * grid.integrate_values(&e2);
    Ok(EnergyBreakdown {
        f1,
        f2,
        total: f1 + f2,
        d_film: grid.integrate_values(&d1),
        d_diff: r_over * grid.integrate_values(&d2),
        marangoni_power: grid.integrate_values(&mp),
        lyapunov: p.has_lyapunov_functional(),
    })
}

/// `phi = A h^-n` pointwise.
pub fn vdw_potential<T: Real>(h: &Field<T>, p: &Params<T>) -> Result<Field<T>> {
    check_positive(h.values())?;
    h.map(|v| p.phi(v))
}

/// `mu = c^3 - c - (Cn^2/h) (h c_x)_x`.
pub fn chemical_potential<T: Real>(s: &State<T>, p: &Params<T>) -> Result<Field<T>> {
    let (mu, _, _) = chemical_potential_values(s.grid(), s.h().values(), s.c().values(), p);
    s.grid().field(mu)
}

/// Volume flux `J`.
pub fn flux_j<T: Real>(s: &State<T>, p: &Params<T>) -> Result<Field<T>> {
    let k = kinematics(s.grid(), s.h().values(), s.c().values(), p)?;
    s.grid().field(k.flux)
}

/// Right-hand sides of the evolution equations.
#[derive(Debug, Clone)]
pub struct Rhs<T: Real> {
    pub dh_dt: Field<T>,
    /// Time derivative of `c h`.
    pub dch_dt: Field<T>,
    /// `(dch_dt - c dh_dt) / h`
    pub dc_dt: Field<T>,
}

pub fn rhs<T: Real>(s: &State<T>, p: &Params<T>) -> Result<Rhs<T>> {
    let g = s.grid();
    let (h, c) = (s.h().values(), s.c().values());
    let (dh, dq) = rhs_values(g, h, c, p)?;
    let dc = (0..h.len()).map(|i| (dq[i] - c[i] * dh[i]) / h[i]).collect();
    Ok(Rhs {
        dh_dt: g.field(dh)?,
        dch_dt: g.field(dq)?,
        dc_dt: g.field(dc)?,
    })
}

/// Energy and dissipation. Attractive VdW or nonuniform tension is allowed but
/// comes back with `lyapunov == false`.
pub fn energy<T: Real>(s: &State<T>, p: &Params<T>) -> Result<EnergyBreakdown<T>> {
    energy_values(s.grid(), s.h().values(), s.c().values(), p)
}

/// Lubrication velocity `U0(x, z)` on `nz` equally spaced levels `z_j = h(x) j / (nz - 1)`.
#[derive(Debug, Clone)]
pub struct VelocityField<T> {
    /// Rows are vertical levels, columns are grid points.
    pub z: Array2<T>,
    pub u: Array2<T>,
}

impl<T: Real> VelocityField<T> {
    pub fn nz(&self) -> usize {
        self.u.nrows()
    }

    /// `int_0^h U0 dz` per column; equals the flux `J`.
    pub fn depth_integral(&self) -> Vec<T> {
        let nz = self.nz();
        (0..self.u.ncols())
            .map(|i| {
                let col: Vec<T> = (0..nz).map(|j| self.u[[j, i]]).collect();
                let dz = self.z[[1, i]] - self.z[[0, i]];
                simpson_samples(&col, dz)
            })
            .collect()
    }
}

/// `U0 = z sigma_x + (z^2/2 - h z) B` with `B = d/dx(-h_xx/C + phi) + (r/h) d/dx(h c_x^2)`
/// (pressure eliminated through the Laplace-Young condition).
pub fn reconstruct_velocity<T: Real>(s: &State<T>, p: &Params<T>, nz: usize) -> Result<VelocityField<T>> {
    if nz < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 vertical levels, got {nz}")));
    }
    let g = s.grid();
    let k = kinematics(g, s.h().values(), s.c().values(), p)?;
    let sigma_x = p.sigma_x_on(g)?;
    let n = g.n();
    let h = s.h().values();
    let mut z = Array2::zeros((nz, n));
    let mut u = Array2::zeros((nz, n));
    let half = lit::<T>(0.5);
    for i in 0..n {
        let sx = sigma_x.map_or(T::zero(), |s| s[i]);
        for j in 0..nz {
            let zz = h[i] * T::from_count(j) / T::from_count(nz - 1);
            z[[j, i]] = zz;
            u[[j, i]] = zz * sx + (half * zz * zz - h[i] * zz) * k.q[i];
        }
    }
    Ok(VelocityField { z, u })
}

/// Decoupled linear rates about `(h, c) = (1, 0)` for a mode of wavenumber `k`:
/// `lambda_c = k^2 - Cn^2 k^4`, `lambda_h = -k^4 / (3C) + n A k^2 / 3`.
pub fn linear_growth_rates<T: Real>(p: &Params<T>, k: T) -> (T, T) {
    let k2 = k * k;
    let k4 = k2 * k2;
    let lambda_c = k2 - p.cahn * p.cahn * k4;
    let lambda_h = -k4 / (lit::<T>(3.0) * p.capillary)
        + T::from_count(p.vdw_exponent as usize) * p.hamaker * k2 / lit(3.0);
    (lambda_h, lambda_c)
}

/// Range of a field, convenient for diagnostics.
pub fn field_range<T: Real>(f: &Field<T>) -> (T, T) {
    (min_value(f.values()), max_value(f.values()))
}
