//! Matrix-free linear operators over flat cube vectors.
//!
//! Every operator carries an exact adjoint. Vectors follow the layout of
//! [`crate::cube`]: band-sequential, column-major within a band.

mod blur;
mod diff;
mod hsstv;
mod norm;
mod sampling;
mod spectral;
mod stacked;

pub use blur::{gaussian_kernel, Blur, BlurSpec};
pub use diff::{SpatialDiff, SpectralDiff};
pub use hsstv::Hsstv;
pub use norm::{operator_norm_estimate, DEFAULT_NORM_ITERS, NORM_SAFETY_FACTOR};
pub use sampling::{BandSelect, Downsample};
pub use spectral::{SpectralMix, SpectralResponse};
pub use stacked::{DualLayout, StackedOperator};

/// A real linear map `R^in_dim -> R^out_dim` together with its transpose.
///
/// `apply_into` and `adjoint_into` overwrite `out` and panic when slice
/// lengths disagree with the declared dimensions.
pub trait LinearOperator: Send + Sync {
    fn in_dim(&self) -> usize;

    fn out_dim(&self) -> usize;

    fn name(&self) -> &str;

    fn apply_into(&self, x: &[f64], out: &mut [f64]);

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.out_dim()];
        self.apply_into(x, &mut out);
        out
    }

    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.in_dim()];
        self.adjoint_into(y, &mut out);
        out
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn in_dim(&self) -> usize {
        (**self).in_dim()
    }
    fn out_dim(&self) -> usize {
        (**self).out_dim()
    }
    fn name(&self) -> &str {
        (**self).name()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply_into(x, out)
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        (**self).adjoint_into(y, out)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for Box<T> {
    fn in_dim(&self) -> usize {
        (**self).in_dim()
    }
    fn out_dim(&self) -> usize {
        (**self).out_dim()
    }
    fn name(&self) -> &str {
        (**self).name()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply_into(x, out)
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        (**self).adjoint_into(y, out)
    }
}

#[inline]
pub(crate) fn check_lengths(op: &dyn LinearOperator, input: usize, output: usize, adjoint: bool) {
    let (want_in, want_out) = if adjoint {
        (op.out_dim(), op.in_dim())
    } else {
        (op.in_dim(), op.out_dim())
    };
    assert!(
        input == want_in && output == want_out,
        "{}{}: expected {} -> {}, got {} -> {}",
        op.name(),
        if adjoint { " adjoint" } else { "" },
        want_in,
        want_out,
        input,
        output
    );
}

/// The identity on `R^dim`.
#[derive(Debug, Clone)]
pub struct Identity {
    dim: usize,
}

impl Identity {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl LinearOperator for Identity {
    fn in_dim(&self) -> usize {
        self.dim
    }
    fn out_dim(&self) -> usize {
        self.dim
    }
    fn name(&self) -> &str {
        "identity"
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        check_lengths(self, x.len(), out.len(), false);
        out.copy_from_slice(x);
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        check_lengths(self, y.len(), out.len(), true);
        out.copy_from_slice(y);
    }
}

/// `factor * op`.
#[derive(Debug, Clone)]
pub struct Scaled<O> {
    op: O,
    factor: f64,
}

impl<O: LinearOperator> Scaled<O> {
    pub fn new(op: O, factor: f64) -> Self {
        Self { op, factor }
    }
}

impl<O: LinearOperator> LinearOperator for Scaled<O> {
    fn in_dim(&self) -> usize {
        self.op.in_dim()
    }
    fn out_dim(&self) -> usize {
        self.op.out_dim()
    }
    fn name(&self) -> &str {
        self.op.name()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        self.op.apply_into(x, out);
        out.iter_mut().for_each(|v| *v *= self.factor);
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.op.adjoint_into(y, out);
        out.iter_mut().for_each(|v| *v *= self.factor);
    }
}

/// `<a, b>` with a fixed left-to-right summation order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
