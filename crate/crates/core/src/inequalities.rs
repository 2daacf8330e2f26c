//! One-dimensional periodic Sobolev-type inequalities used by the
//! minimum-height argument, evaluated on sampled fields.
//!
//! For periodic `phi` on `[0, L]`:
//!
//! ```text
//! sup|phi| <= ||phi||_1 / L + ||phi_x||_1 <= ||phi||_2 / sqrt(L) + sqrt(L) ||phi_x||_2
//! ||phi_x||_2^2 <= L ||phi_xx||_1^2 + (4 / L) ||phi||_1 ||phi_xx||_1
//! ```

use rand::Rng;

use crate::error::Result;
use crate::grid::{check_finite, Field, Grid, Norm};
use crate::scalar::{lit, Real};

/// Slacks (bound minus left-hand side) of both inequalities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevSlack<T> {
    pub sup: T,
    /// `||phi||_1 / L + ||phi_x||_1`
    pub intermediate_bound: T,
    /// `||phi||_2 / sqrt(L) + sqrt(L) ||phi_x||_2`
    pub first_bound: T,
    pub first_slack: T,
    pub second_lhs: T,
    pub second_bound: T,
    pub second_slack: T,
    /// Largest spectral magnitude above a quarter of the bins, relative to the peak.
    pub spectral_tail: T,
    /// False when the tail exceeds `1e-3`; derivatives of such input are not trustworthy.
    pub reliable: bool,
}

impl<T: Real> SobolevSlack<T> {
    pub fn min_slack(&self) -> T {
        self.first_slack.min(self.second_slack)
    }
}

/// Relative spectral content in bins with `|m| > n/4`.
pub fn spectral_tail<T: Real>(f: &Field<T>) -> T {
    let n = f.len();
    let spec = f.grid().forward(f.values());
    let mag = |j: usize| spec[j].norm();
    let peak = (0..n).map(mag).fold(T::zero(), T::max);
    if peak == T::zero() {
        return T::zero();
    }
    let tail = (0..n)
        .filter(|&j| j.min(n - j) > n / 4)
        .map(mag)
        .fold(T::zero(), T::max);
    tail / peak
}

pub fn check_sobolev_inequalities<T: Real>(f: &Field<T>) -> Result<SobolevSlack<T>> {
    check_finite(f.values(), "inequality input")?;
    let l = f.grid().length();
    let fx = f.deriv(1)?;
    let fxx = f.deriv(2)?;
    let sup = f.norm(Norm::Inf);
    let l1 = f.norm(Norm::L1);
    let l2 = f.norm(Norm::L2);
    let intermediate_bound = l1 / l + fx.norm(Norm::L1);
    let first_bound = l2 / l.sqrt() + l.sqrt() * fx.norm(Norm::L2);
    let fxx1 = fxx.norm(Norm::L1);
    let second_lhs = fx.norm(Norm::L2).powi(2);
    let second_bound = l * fxx1 * fxx1 + lit::<T>(4.0) / l * l1 * fxx1;
    let spectral_tail = spectral_tail(f);
    Ok(SobolevSlack {
        sup,
        intermediate_bound,
        first_bound,
        first_slack: first_bound - sup,
        second_lhs,
        second_bound,
        second_slack: second_bound - second_lhs,
        spectral_tail,
        reliable: spectral_tail <= lit(1e-3),
    })
}

/// Random real trigonometric polynomial of the given degree sampled on `grid`.
///
/// Coefficients are uniform in `[-1, 1]`; the returned vector holds
/// `(a_0, a_1, b_1, ..., a_d, b_d)` for `a_0 + sum a_m cos(k_m x) + b_m sin(k_m x)`.
pub fn random_trig_polynomial<T: Real, R: Rng + ?Sized>(
    grid: &Grid<T>,
    degree: usize,
    rng: &mut R,
) -> Result<(Field<T>, Vec<T>)> {
    let mut coeffs = Vec::with_capacity(2 * degree + 1);
    coeffs.push(lit::<T>(rng.gen_range(-1.0..=1.0)));
    for _ in 0..degree {
        coeffs.push(lit::<T>(rng.gen_range(-1.0..=1.0)));
        coeffs.push(lit::<T>(rng.gen_range(-1.0..=1.0)));
    }
    let base = T::TAU() / grid.length();
    let field = grid.field_from_fn(|x| {
        let mut v = coeffs[0];
        for m in 1..=degree {
            let k = base * T::from_count(m);
            v = v + coeffs[2 * m - 1] * (k * x).cos() + coeffs[2 * m] * (k * x).sin();
        }
        v
    })?;
    Ok((field, coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn constant_saturates_first_inequality() {
        let g = Grid::new(3.0, 32).unwrap();
        let f: Field<f64> = g.constant(-1.7).unwrap();
        let s = check_sobolev_inequalities(&f).unwrap();
        assert!(s.first_slack.abs() < 1e-14, "{}", s.first_slack);
        assert!(s.reliable);
    }

    #[test]
    fn sine_on_two_pi() {
        let g = Grid::new(TAU, 64).unwrap();
        let f = g.field_from_fn(|x| x.sin()).unwrap();
        let s = check_sobolev_inequalities(&f).unwrap();
        let expected = (1.0 / TAU.sqrt()) * PI.sqrt() + TAU.sqrt() * PI.sqrt();
        assert!((s.first_bound - expected).abs() < 1e-12);
        assert!((s.sup - 1.0).abs() < 1e-12);
        assert!(s.first_slack > 0.0);
        assert!(s.second_slack > 0.0);
    }

    #[test]
    fn parseval_matches_coefficient_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let l = 4.5;
        let g = Grid::new(l, 64).unwrap();
        for _ in 0..20 {
            let (f, c) = random_trig_polynomial(&g, 12, &mut rng).unwrap();
            let parseval = l * c[0] * c[0] + 0.5 * l * c[1..].iter().map(|a| a * a).sum::<f64>();
            assert!((f.norm(Norm::L2).powi(2) - parseval).abs() < 1e-12 * parseval.max(1.0));
        }
    }

    #[test]
    fn rough_input_is_flagged() {
        let g = Grid::new(1.0, 64).unwrap();
        let f = g.field((0..64).map(|i| if i == 5 { 1.0 } else { 0.0 }).collect()).unwrap();
        let s = check_sobolev_inequalities(&f).unwrap();
        assert!(!s.reliable);
    }
}
