//! Uniform periodic grid, periodic derivatives, quadrature and norms.
//!
//! The default derivative backend is Fourier pseudo-spectral. A 4th-order
//! centered finite-difference backend is kept alongside it so the two can be
//! checked against each other.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::{lit, max_abs, Real};

/// Which discretisation [`Field::deriv_with`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DerivBackend {
    #[default]
    Spectral,
    /// Centered, 4th-order accurate periodic stencils.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
    Inf,
}

struct GridInner<T: Real> {
    length: T,
    n: usize,
    dx: T,
    wavenumbers: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

/// Uniform periodic grid on `[0, L)` with `n` samples, `x_i = i * dx`.
///
/// Cloning is cheap: the FFT plans are shared.
#[derive(Clone)]
pub struct Grid<T: Real> {
    inner: Arc<GridInner<T>>,
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("length", &self.inner.length)
            .field("n", &self.inner.n)
            .finish()
    }
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.n == other.inner.n && self.inner.length == other.inner.length)
    }
}

impl<T: Real> Grid<T> {
    /// `n` must be even and at least 8; `length` positive and finite.
    pub fn new(length: T, n: usize) -> Result<Self> {
        if !(length.is_finite() && length > T::zero()) {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        if n < 8 {
            return Err(Error::InvalidGrid(format!("need at least 8 points, got {n}")));
        }
        if n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("point count must be even, got {n}")));
        }
        let dx = length / T::from_count(n);
        let base = T::TAU() / length;
        let wavenumbers = (0..n)
            .map(|j| {
                if j <= n / 2 {
                    base * T::from_count(j)
                } else {
                    -base * T::from_count(n - j)
                }
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self {
            inner: Arc::new(GridInner {
                length,
                n,
                dx,
                wavenumbers,
                forward,
                inverse,
            }),
        })
    }

    pub fn length(&self) -> T {
        self.inner.length
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn dx(&self) -> T {
        self.inner.dx
    }

    pub fn x(&self, i: usize) -> T {
        T::from_count(i) * self.inner.dx
    }

    pub fn points(&self) -> Vec<T> {
        (0..self.n()).map(|i| self.x(i)).collect()
    }

    /// Signed angular wavenumber of FFT bin `j` (the Nyquist bin carries `+k`).
    pub fn wavenumber(&self, j: usize) -> T {
        self.inner.wavenumbers[j]
    }

    pub fn wavenumbers(&self) -> &[T] {
        &self.inner.wavenumbers
    }

    /// Unnormalised forward DFT of real samples.
    pub fn forward(&self, values: &[T]) -> Vec<Complex<T>> {
        debug_assert_eq!(values.len(), self.n());
        let mut buf: Vec<Complex<T>> = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.inner.forward.process(&mut buf);
        buf
    }

    /// Inverse of [`Grid::forward`], keeping the real part.
    pub fn inverse(&self, mut spectrum: Vec<Complex<T>>) -> Vec<T> {
        debug_assert_eq!(spectrum.len(), self.n());
        self.inner.inverse.process(&mut spectrum);
        let scale = T::one() / T::from_count(self.n());
        spectrum.into_iter().map(|z| z.re * scale).collect()
    }

    /// Spectral multiplier for a derivative of the given order at bin `j`.
    fn multiplier(&self, j: usize, order: usize) -> Complex<T> {
        let n = self.n();
        if j == n / 2 && order % 2 == 1 {
            return Complex::new(T::zero(), T::zero());
        }
        let k = self.wavenumber(j);
        let kp = k.powi(order as i32);
        match order % 4 {
            0 => Complex::new(kp, T::zero()),
            1 => Complex::new(T::zero(), kp),
            2 => Complex::new(-kp, T::zero()),
            _ => Complex::new(T::zero(), -kp),
        }
    }

    /// Spectral derivative of raw samples; no finiteness check.
    pub(crate) fn spectral_deriv(&self, values: &[T], order: usize) -> Vec<T> {
        let spec = self.forward(values);
        self.apply_multiplier(&spec, order)
    }

    pub(crate) fn apply_multiplier(&self, spec: &[Complex<T>], order: usize) -> Vec<T> {
        let d: Vec<Complex<T>> = spec
            .iter()
            .enumerate()
            .map(|(j, &z)| z * self.multiplier(j, order))
            .collect();
        self.inverse(d)
    }

    /// Several spectral derivatives of the same samples from one forward transform.
    pub(crate) fn spectral_derivs<const K: usize>(&self, values: &[T], orders: [usize; K]) -> [Vec<T>; K] {
        let spec = self.forward(values);
        orders.map(|o| self.apply_multiplier(&spec, o))
    }

    pub(crate) fn fd_deriv(&self, f: &[T], order: usize) -> Vec<T> {
        let n = self.n();
        let dx = self.dx();
        let at = |i: usize, off: isize| -> T { f[((i as isize + off).rem_euclid(n as isize)) as usize] };
        let (weights, denom): (&[(isize, f64)], T) = match order {
            1 => (&[(-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)], lit::<T>(12.0) * dx),
            2 => (
                &[(-2, -1.0), (-1, 16.0), (0, -30.0), (1, 16.0), (2, -1.0)],
                lit::<T>(12.0) * dx * dx,
            ),
            3 => (
                &[(-3, 1.0), (-2, -8.0), (-1, 13.0), (1, -13.0), (2, 8.0), (3, -1.0)],
                lit::<T>(8.0) * dx.powi(3),
            ),
            _ => (
                &[(-3, -1.0), (-2, 12.0), (-1, -39.0), (0, 56.0), (1, -39.0), (2, 12.0), (3, -1.0)],
                lit::<T>(6.0) * dx.powi(4),
            ),
        };
        (0..n)
            .map(|i| weights.iter().fold(T::zero(), |acc, &(o, w)| acc + lit::<T>(w) * at(i, o)) / denom)
            .collect()
    }

    /// Rectangle-rule quadrature `sum(values) * dx`.
    pub(crate) fn integrate_values(&self, values: &[T]) -> T {
        values.iter().copied().sum::<T>() * self.dx()
    }

    pub fn field(&self, values: Vec<T>) -> Result<Field<T>> {
        Field::new(self.clone(), values)
    }

    pub fn field_from_fn(&self, f: impl Fn(T) -> T) -> Result<Field<T>> {
        self.field((0..self.n()).map(|i| f(self.x(i))).collect())
    }

    pub fn constant(&self, value: T) -> Result<Field<T>> {
        self.field(vec![value; self.n()])
    }
}

/// Scalar samples living on a [`Grid`]. Entries are always finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T: Real> {
    grid: Grid<T>,
    values: Vec<T>,
}

pub(crate) fn check_finite<T: Real>(values: &[T], what: &'static str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            what,
            index,
            value: values[index].to_f64_lossy(),
        }),
        None => Ok(()),
    }
}

impl<T: Real> Field<T> {
    pub fn new(grid: Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::LengthMismatch {
                expected: grid.n(),
                found: values.len(),
            });
        }
        check_finite(&values, "field")?;
        Ok(Self { grid, values })
    }

    /// Skips the finiteness check; callers guarantee it.
    pub(crate) fn from_parts(grid: Grid<T>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Periodic derivative of order 1..=4 using the spectral backend.
    pub fn deriv(&self, order: usize) -> Result<Self> {
        self.deriv_with(order, DerivBackend::Spectral)
    }

    pub fn deriv_with(&self, order: usize, backend: DerivBackend) -> Result<Self> {
        if !(1..=4).contains(&order) {
            return Err(Error::DerivativeOrder(order));
        }
        check_finite(&self.values, "derivative input")?;
        let values = match backend {
            DerivBackend::Spectral => self.grid.spectral_deriv(&self.values, order),
            DerivBackend::FiniteDifference => self.grid.fd_deriv(&self.values, order),
        };
        Ok(Self::from_parts(self.grid.clone(), values))
    }

    /// Periodic rectangle rule, exact for trigonometric polynomials below Nyquist.
    pub fn integrate(&self) -> T {
        self.grid.integrate_values(&self.values)
    }

    pub fn norm(&self, p: Norm) -> T {
        match p {
            Norm::L1 => self.values.iter().map(|v| v.abs()).sum::<T>() * self.grid.dx(),
            Norm::L2 => (self.values.iter().map(|&v| v * v).sum::<T>() * self.grid.dx()).sqrt(),
            Norm::Inf => max_abs(&self.values),
        }
    }

    pub fn min(&self) -> T {
        crate::scalar::min_value(&self.values)
    }

    pub fn max(&self) -> T {
        crate::scalar::max_value(&self.values)
    }

    pub fn argmin(&self) -> usize {
        self.values
            .iter()
            .enumerate()
            .fold((0, T::infinity()), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) })
            .0
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Self::new(
            self.grid.clone(),
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }
}
