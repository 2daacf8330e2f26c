//! Implicit integration of autonomous ODE systems `y' = f(y)`: backward Euler
//! and variable-step BDF2, solved by simplified Newton with a finite-difference
//! Jacobian that is reused across iterations and steps while it keeps working.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::DenseLu;
use crate::scalar::{lit, max_abs, Real};

pub trait OdeSystem<T: Real> {
    fn dim(&self) -> usize;
    fn rhs(&self, y: &[T]) -> Result<Vec<T>>;

    /// Forward-difference Jacobian of `rhs`, column by column.
    fn jacobian(&self, y: &[T], f0: &[T]) -> Result<Array2<T>> {
        let n = self.dim();
        let mut jac = Array2::zeros((n, n));
        let root_eps = T::epsilon().sqrt();
        let mut yp = y.to_vec();
        for j in 0..n {
            let step = root_eps * y[j].abs().max(T::one());
            yp[j] = y[j] + step;
            let fp = self.rhs(&yp)?;
            yp[j] = y[j];
            for i in 0..n {
                jac[[i, j]] = (fp[i] - f0[i]) / step;
            }
        }
        Ok(jac)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings<T> {
    /// Convergence threshold on the residual infinity norm.
    pub tol: T,
    pub max_iter: usize,
}

/// BDF coefficients `a0 y_{n+1} - a1 y_n + a2 y_{n-1} = dt f(y_{n+1})`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Bdf<T> {
    a0: T,
    a1: T,
    a2: T,
}

impl<T: Real> Bdf<T> {
    fn euler() -> Self {
        Self { a0: T::one(), a1: T::one(), a2: T::zero() }
    }

    /// Variable-step BDF2 with `omega = dt_n / dt_{n-1}`.
    fn two(omega: T) -> Self {
        let one = T::one();
        Self {
            a0: (one + omega + omega) / (one + omega),
            a1: one + omega,
            a2: omega * omega / (one + omega),
        }
    }
}

/// Holds the last Jacobian and the factored iteration matrix between steps.
#[derive(Debug, Clone, Default)]
pub struct ImplicitStepper<T> {
    jac: Option<Array2<T>>,
    lu: Option<(DenseLu<T>, T, T)>,
    pub jacobian_evaluations: usize,
    pub rhs_evaluations: usize,
}

/// Outcome of one implicit step.
#[derive(Debug, Clone)]
pub struct ImplicitStep<T> {
    pub y: Vec<T>,
    pub iterations: usize,
    pub residual: T,
}

impl<T: Real> ImplicitStepper<T> {
    pub fn new() -> Self {
        Self { jac: None, lu: None, jacobian_evaluations: 0, rhs_evaluations: 0 }
    }

    /// Forget the stored Jacobian, e.g. after a rejected step.
    pub fn reset(&mut self) {
        self.jac = None;
        self.lu = None;
    }

    /// One step from `y_n` (and `y_{n-1}` with its step for BDF2; backward Euler otherwise).
    pub fn step<S: OdeSystem<T> + ?Sized>(
        &mut self,
        sys: &S,
        y_n: &[T],
        history: Option<(&[T], T)>,
        dt: T,
        newton: NewtonSettings<T>,
    ) -> Result<ImplicitStep<T>> {
        let (bdf, guess) = match history {
            Some((y_nm1, dt_prev)) => {
                let omega = dt / dt_prev;
                let guess: Vec<T> = y_n.iter().zip(y_nm1).map(|(&a, &b)| a + omega * (a - b)).collect();
                (Bdf::two(omega), guess)
            }
            None => (Bdf::euler(), y_n.to_vec()),
        };
        let y_nm1 = history.map(|h| h.0);
        match self.newton(sys, y_n, y_nm1, &bdf, dt, guess.clone(), newton, false) {
            Ok(s) => Ok(s),
            // a stale Jacobian is the usual culprit; retry once with a fresh one
            Err(_) if self.jac.is_some() => {
                self.reset();
                self.newton(sys, y_n, y_nm1, &bdf, dt, guess, newton, true)
            }
            Err(e) => Err(e),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn newton<S: OdeSystem<T> + ?Sized>(
        &mut self,
        sys: &S,
        y_n: &[T],
        y_nm1: Option<&[T]>,
        bdf: &Bdf<T>,
        dt: T,
        mut y: Vec<T>,
        settings: NewtonSettings<T>,
        fresh: bool,
    ) -> Result<ImplicitStep<T>> {
        let n = y.len();
        let residual_of = |y: &[T], f: &[T]| -> Vec<T> {
            (0..n)
                .map(|i| {
                    let hist = bdf.a1 * y_n[i] - y_nm1.map_or(T::zero(), |p| bdf.a2 * p[i]);
                    bdf.a0 * y[i] - hist - dt * f[i]
                })
                .collect()
        };
        let mut f = sys.rhs(&y)?;
        self.rhs_evaluations += 1;
        let mut res = residual_of(&y, &f);
        let mut norm = max_abs(&res);
        let mut last_norm = T::infinity();
        for it in 0..=settings.max_iter {
            if !norm.is_finite() {
                break;
            }
            // at least one correction: the predictor's residual can sit below an
            // absolute tolerance while still missing the whole step (tiny states)
            if it > 0 && norm <= settings.tol {
                return Ok(ImplicitStep { y, iterations: it, residual: norm });
            }
            if it == settings.max_iter {
                break;
            }
            // a contraction slower than 1/2 means the Jacobian is stale
            if it > 0 && norm > lit::<T>(0.5) * last_norm && !fresh {
                return Err(Error::NewtonDivergence { iterations: it, residual: norm.to_f64_lossy() });
            }
            if self.jac.is_none() {
                self.jac = Some(sys.jacobian(&y, &f)?);
                self.jacobian_evaluations += 1;
                self.rhs_evaluations += n;
                self.lu = None;
            }
            let stale = match &self.lu {
                Some((_, a0, h)) => *a0 != bdf.a0 || *h != dt,
                None => true,
            };
            if stale {
                let jac = self.jac.as_ref().expect("jacobian present");
                let mut m = jac.mapv(|v| -dt * v);
                for i in 0..n {
                    m[[i, i]] = m[[i, i]] + bdf.a0;
                }
                self.lu = Some((DenseLu::factor(m)?, bdf.a0, dt));
            }
            let lu = &self.lu.as_ref().expect("factored").0;
            let delta = lu.solve(&res);
            for i in 0..n {
                y[i] = y[i] - delta[i];
            }
            f = sys.rhs(&y)?;
            self.rhs_evaluations += 1;
            res = residual_of(&y, &f);
            last_norm = norm;
            norm = max_abs(&res);
            // the update has reached roundoff: the residual cannot shrink further
            let floor = lit::<T>(16.0) * T::epsilon() * (T::one() + max_abs(&y));
            if max_abs(&delta) <= floor && norm <= lit::<T>(1e3) * settings.tol {
                return Ok(ImplicitStep { y, iterations: it + 1, residual: norm });
            }
        }
        Err(Error::NewtonDivergence {
            iterations: settings.max_iter,
            residual: norm.to_f64_lossy(),
        })
    }
}
