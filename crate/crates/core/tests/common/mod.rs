//! Numerical minimizers used as proximity-operator oracles.

use nalgebra::{DMatrix, DVector};

/// Minimizer of a convex scalar function on `[lo, hi]` by golden-section search.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > 1e-12 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Minimizer of `||z|| + ||z - x||^2 / (2 gamma)` by damped Newton on the
/// smoothed norm `sqrt(||z||^2 + delta^2)`.
pub fn group_minimizer(x: &[f64], gamma: f64) -> Vec<f64> {
    let delta = 1e-10;
    let n = x.len();
    let xv = DVector::from_column_slice(x);
    let objective = |z: &DVector<f64>| {
        (z.norm_squared() + delta * delta).sqrt() + (z - &xv).norm_squared() / (2.0 * gamma)
    };
    let mut z = xv.clone();
    for _ in 0..200 {
        let s = (z.norm_squared() + delta * delta).sqrt();
        let grad = &z / s + (&z - &xv) / gamma;
        if grad.norm() < 1e-14 {
            break;
        }
        let hess = (DMatrix::identity(n, n) - &z * z.transpose() / (s * s)) / s
            + DMatrix::identity(n, n) / gamma;
        let step = hess
            .lu()
            .solve(&grad)
            .expect("hessian is positive definite");
        let f0 = objective(&z);
        let mut t = 1.0;
        while objective(&(&z - t * &step)) > f0 && t > 1e-16 {
            t *= 0.5;
        }
        z -= t * step;
    }
    z.iter().copied().collect()
}
