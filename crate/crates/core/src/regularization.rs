//! Regularised mobility functions used by the Galerkin construction.
//!
//! `g(s) = s + eps` for `s >= 0`; for `s < 0` the branch
//! `g(s) = (eps/2) (1 + exp(-(u + u^2/2 + u^3/3)))` with `u = -2s/eps`
//! joins it with matching value and first three derivatives, stays positive,
//! increases monotonically and tends to `eps/2` as `s -> -inf`.
//! `f = g^3`, and `G'' = 1 / (f g)` with `G(s) = 1 / (6 (s + eps)^2)` on `s >= 0`.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::quad::{composite_gauss, gauss_legendre};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizedFamily<T> {
    eps: T,
}

/// Values of `g` and its first three derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GDerivs<T> {
    pub g: T,
    pub d1: T,
    pub d2: T,
    pub d3: T,
}

// Beyond s = -TAIL * eps the exponential part of g is below 1e-600 relative.
const TAIL: f64 = 8.0;
const PANELS: usize = 48;

fn gl_rule_f64() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(10))
}

impl<T: Real> RegularizedFamily<T> {
    pub fn new(eps: T) -> Result<Self> {
        if !(eps > T::zero() && eps.is_finite()) {
            return Err(Error::InvalidParams(format!("eps must be positive, got {eps}")));
        }
        Ok(Self { eps })
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn g(&self, s: T) -> T {
        self.g_derivs(s).g
    }

    pub fn g_derivs(&self, s: T) -> GDerivs<T> {
        let eps = self.eps;
        if s >= T::zero() {
            return GDerivs {
                g: s + eps,
                d1: T::one(),
                d2: T::zero(),
                d3: T::zero(),
            };
        }
        let two = lit::<T>(2.0);
        let u = -two * s / eps;
        let p = u + u * u / two + u * u * u / lit(3.0);
        let p1 = T::one() + u + u * u;
        let p2 = T::one() + two * u;
        let p3 = two;
        let e = (-p).exp();
        // du/ds = -2/eps
        let g = eps / two * (T::one() + e);
        let d1 = e * p1;
        let d2 = -two / eps * e * (p2 - p1 * p1);
        let d3 = lit::<T>(4.0) / (eps * eps) * e * (-p1 * (p2 - p1 * p1) + p3 - two * p1 * p2);
        GDerivs { g, d1, d2, d3 }
    }

    pub fn f(&self, s: T) -> T {
        self.g(s).powi(3)
    }

    /// `1 / (f g) = g^-4`, the second derivative of `G`.
    pub fn weight(&self, s: T) -> T {
        self.g(s).powi(-4)
    }

    /// `G(s)`; closed form on `s >= 0`, Gauss-Legendre quadrature otherwise.
    #[allow(non_snake_case)]
    pub fn G(&self, s: T) -> Result<T> {
        let eps = self.eps;
        let six = lit::<T>(6.0);
        if s >= T::zero() {
            return Ok(T::one() / (six * (s + eps) * (s + eps)));
        }
        // G(s) = G(0) + |s| H(0) + int_s^0 (t - s) w(t) dt, H(0) = 1 / (3 eps^3)
        let g0 = T::one() / (six * eps * eps);
        let h0 = T::one() / (lit::<T>(3.0) * eps * eps * eps);
        let coarse = self.tail_integral(s, PANELS);
        let fine = self.tail_integral(s, 2 * PANELS);
        let scale = fine.abs().max(g0);
        if (coarse - fine).abs() > lit::<T>(1e3) * T::epsilon() * scale {
            return Err(Error::Quadrature(format!(
                "G_eps({s}) panel refinement changed the value by {:e}",
                (coarse - fine).abs()
            )));
        }
        Ok(g0 - s * h0 + fine)
    }

    /// `G'(s) = -int_s^inf w`, negative everywhere.
    #[allow(non_snake_case)]
    pub fn G_prime(&self, s: T) -> T {
        let eps = self.eps;
        if s >= T::zero() {
            return -T::one() / (lit::<T>(3.0) * (s + eps).powi(3));
        }
        let h0 = T::one() / (lit::<T>(3.0) * eps * eps * eps);
        let rule = self.rule();
        let w = |t: T| self.weight(t);
        let cut = -lit::<T>(TAIL) * eps;
        let near = composite_gauss(w, s.max(cut), T::zero(), PANELS, &rule);
        let far = if s < cut {
            (cut - s) * (lit::<T>(2.0) / eps).powi(4)
        } else {
            T::zero()
        };
        -(h0 + near + far)
    }

    fn rule(&self) -> (Vec<T>, Vec<T>) {
        let (x, w) = gl_rule_f64();
        (x.iter().map(|&v| lit(v)).collect(), w.iter().map(|&v| lit(v)).collect())
    }

    /// `int_s^0 (t - s) w(t) dt` for `s < 0`.
    fn tail_integral(&self, s: T, panels: usize) -> T {
        let eps = self.eps;
        let rule = self.rule();
        let cut = -lit::<T>(TAIL) * eps;
        let integrand = |t: T| (t - s) * self.weight(t);
        let near = composite_gauss(integrand, s.max(cut), T::zero(), panels, &rule);
        if s >= cut {
            return near;
        }
        // w is constant (eps/2)^-4 to machine precision on [s, cut].
        let w_inf = (lit::<T>(2.0) / eps).powi(4);
        near + w_inf * (cut - s) * (cut - s) / lit(2.0)
    }
}
