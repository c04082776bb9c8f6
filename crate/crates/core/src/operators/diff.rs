use super::{check_lengths, LinearOperator};
use crate::cube::CubeDims;

/// Forward spatial differences `D = [D_v; D_h]` with Neumann boundaries.
///
/// Output is `2 * nv * nh * b` long: the vertical differences of every band
/// followed by the horizontal ones. The difference at the last row (for
/// `D_v`) or last column (for `D_h`) is zero.
#[derive(Debug, Clone)]
pub struct SpatialDiff {
    dims: CubeDims,
}

impl SpatialDiff {
    pub fn new(dims: CubeDims) -> Self {
        Self { dims }
    }

    pub fn dims(&self) -> CubeDims {
        self.dims
    }
}

impl LinearOperator for SpatialDiff {
    fn in_dim(&self) -> usize {
        self.dims.len()
    }

    fn out_dim(&self) -> usize {
        2 * self.dims.len()
    }

    fn name(&self) -> &str {
        "D"
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        check_lengths(self, x.len(), out.len(), false);
        let CubeDims { nv, nh, .. } = self.dims;
        let n = nv * nh;
        let (dv, dh) = out.split_at_mut(self.dims.len());
        for ((band, dv), dh) in x
            .chunks_exact(n)
            .zip(dv.chunks_exact_mut(n))
            .zip(dh.chunks_exact_mut(n))
        {
            for c in 0..nh {
                let col = c * nv;
                for r in 0..nv {
                    let i = col + r;
                    dv[i] = if r + 1 < nv {
                        band[i + 1] - band[i]
                    } else {
                        0.0
                    };
                    dh[i] = if c + 1 < nh {
                        band[i + nv] - band[i]
                    } else {
                        0.0
                    };
                }
            }
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        check_lengths(self, y.len(), out.len(), true);
        let CubeDims { nv, nh, .. } = self.dims;
        let n = nv * nh;
        let (yv, yh) = y.split_at(self.dims.len());
        for ((out, yv), yh) in out
            .chunks_exact_mut(n)
            .zip(yv.chunks_exact(n))
            .zip(yh.chunks_exact(n))
        {
            for c in 0..nh {
                let col = c * nv;
                for r in 0..nv {
                    let i = col + r;
                    let mut acc = 0.0;
                    if r > 0 {
                        acc += yv[i - 1];
                    }
                    if r + 1 < nv {
                        acc -= yv[i];
                    }
                    if c > 0 {
                        acc += yh[i - nv];
                    }
                    if c + 1 < nh {
                        acc -= yh[i];
                    }
                    out[i] = acc;
                }
            }
        }
    }
}

/// Forward difference along the band axis, zero at the last band.
#[derive(Debug, Clone)]
pub struct SpectralDiff {
    dims: CubeDims,
}

impl SpectralDiff {
    pub fn new(dims: CubeDims) -> Self {
        Self { dims }
    }
}

impl LinearOperator for SpectralDiff {
    fn in_dim(&self) -> usize {
        self.dims.len()
    }

    fn out_dim(&self) -> usize {
        self.dims.len()
    }

    fn name(&self) -> &str {
        "D_b"
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        check_lengths(self, x.len(), out.len(), false);
        let n = self.dims.n_pixels();
        let last = (self.dims.bands - 1) * n;
        for i in 0..last {
            out[i] = x[i + n] - x[i];
        }
        out[last..].fill(0.0);
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        check_lengths(self, y.len(), out.len(), true);
        let n = self.dims.n_pixels();
        let b = self.dims.bands;
        for k in 0..b {
            for p in 0..n {
                let i = k * n + p;
                let mut acc = 0.0;
                if k > 0 {
                    acc += y[i - n];
                }
                if k + 1 < b {
                    acc -= y[i];
                }
                out[i] = acc;
            }
        }
    }
}
