use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{norm2, LinearOperator};
use crate::error::{Error, Result};

pub const DEFAULT_NORM_ITERS: usize = 50;

/// Inflation applied to power-iteration estimates before choosing step sizes.
pub const NORM_SAFETY_FACTOR: f64 = 1.01;

/// Estimates `||op||` by power iteration on `op^T op` from a seeded random start.
///
/// Returns the square root of the Rayleigh quotient of the final iterate. The sequence of
/// quotients is nondecreasing in `iters`, so the estimate approaches the
/// largest singular value from below. A zero operator yields 0.
pub fn operator_norm_estimate(op: &dyn LinearOperator, iters: usize, seed: u64) -> Result<f64> {
    if iters == 0 {
        return Err(Error::param("power iteration needs at least one iteration"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..op.in_dim())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let nx = norm2(&x);
    if nx == 0.0 {
        return Ok(0.0);
    }
    x.iter_mut().for_each(|v| *v /= nx);

    let mut ax = vec![0.0; op.out_dim()];
    for _ in 0..iters {
        op.apply_into(&x, &mut ax);
        op.adjoint_into(&ax, &mut x);
        let nz = norm2(&x);
        if nz == 0.0 {
            return Ok(0.0);
        }
        if !nz.is_finite() {
            return Err(Error::NonFinite(format!(
                "power iteration on {}",
                op.name()
            )));
        }
        x.iter_mut().for_each(|v| *v /= nz);
    }
    op.apply_into(&x, &mut ax);
    Ok(norm2(&ax))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{Identity, Scaled};

    #[test]
    fn identity_and_scaled_identity() {
        let id = Identity::new(17);
        assert!((operator_norm_estimate(&id, 5, 1).unwrap() - 1.0).abs() < 1e-10);
        let three = Scaled::new(Identity::new(17), 3.0);
        assert!((operator_norm_estimate(&three, 5, 1).unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn zero_operator_gives_zero() {
        let zero = Scaled::new(Identity::new(4), 0.0);
        assert_eq!(operator_norm_estimate(&zero, 10, 3).unwrap(), 0.0);
    }

    #[test]
    fn zero_iterations_rejected() {
        assert!(operator_norm_estimate(&Identity::new(3), 0, 0).is_err());
    }
}
