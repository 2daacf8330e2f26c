//! Quadrature rules on intervals.

use crate::scalar::{lit, Real};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre<T: Real>(order: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = vec![T::zero(); order];
    let mut weights = vec![T::zero(); order];
    let n = order as f64;
    for i in 0..(order + 1) / 2 {
        // Newton iteration on P_n from the Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if order == 0 { 1.0 } else { p1 };
            let pnm1 = p0;
            dp = n * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = lit(-x);
        nodes[order - 1 - i] = lit(x);
        weights[i] = lit(w);
        weights[order - 1 - i] = lit(w);
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre rule with `panels` equal panels on `[a, b]`.
pub fn composite_gauss<T: Real>(f: impl Fn(T) -> T, a: T, b: T, panels: usize, rule: &(Vec<T>, Vec<T>)) -> T {
    let (nodes, weights) = rule;
    let h = (b - a) / T::from_count(panels);
    let half = h / lit(2.0);
    let mut total = T::zero();
    for p in 0..panels {
        let mid = a + h * (T::from_count(p) + lit(0.5));
        let mut s = T::zero();
        for (x, w) in nodes.iter().zip(weights) {
            s = s + *w * f(mid + half * *x);
        }
        total = total + s * half;
    }
    total
}

/// Integral of equally spaced samples with spacing `dz`, exact for cubics.
///
/// Composite Simpson on an even number of intervals; when the interval count
/// is odd the last three intervals use the 3/8 rule.
pub fn simpson_samples<T: Real>(samples: &[T], dz: T) -> T {
    let m = samples.len();
    assert!(m >= 2, "need at least two samples");
    let intervals = m - 1;
    if intervals == 1 {
        return (samples[0] + samples[1]) * dz / lit(2.0);
    }
    let simpson = |s: &[T]| -> T {
        let mut acc = s[0] + s[s.len() - 1];
        for (i, &v) in s.iter().enumerate().take(s.len() - 1).skip(1) {
            acc = acc + v * if i % 2 == 1 { lit(4.0) } else { lit(2.0) };
        }
        acc * dz / lit(3.0)
    };
    if intervals % 2 == 0 {
        simpson(samples)
    } else {
        let head = &samples[..m - 3];
        let tail = &samples[m - 4..];
        let head_val = if head.len() >= 3 { simpson(head) } else { T::zero() };
        let tail_val = (tail[0] + lit::<T>(3.0) * tail[1] + lit::<T>(3.0) * tail[2] + tail[3]) * dz * lit(3.0)
            / lit(8.0);
        head_val + tail_val
    }
}
