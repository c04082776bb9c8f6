use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{check_lengths, LinearOperator};
use crate::cube::CubeDims;
use crate::error::{Error, Result};

/// Blur kernel selection.
#[derive(Debug, Clone, PartialEq)]
pub enum BlurSpec {
    Identity,
    /// Isotropic Gaussian truncated to a `(2 radius + 1)^2` support and
    /// normalized to unit sum.
    Gaussian {
        radius: usize,
        sigma: f64,
    },
}

impl BlurSpec {
    /// Kernel of size `(2r + 1)^2` with standard deviation `r / 2`.
    pub fn for_ratio(r: usize) -> Self {
        BlurSpec::Gaussian {
            radius: r,
            sigma: r as f64 / 2.0,
        }
    }
}

/// Row-major `(2 radius + 1)^2` Gaussian weights summing to one.
pub fn gaussian_kernel(radius: usize, sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::param(format!(
            "blur sigma must be positive, got {sigma}"
        )));
    }
    let size = 2 * radius + 1;
    let mut kernel = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let di = i as f64 - radius as f64;
            let dj = j as f64 - radius as f64;
            kernel.push((-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= total);
    Ok(kernel)
}

struct FftPlan {
    fwd_v: Arc<dyn Fft<f64>>,
    inv_v: Arc<dyn Fft<f64>>,
    fwd_h: Arc<dyn Fft<f64>>,
    inv_h: Arc<dyn Fft<f64>>,
    /// Kernel spectrum, row-major `nv x nh`.
    transfer: Vec<Complex<f64>>,
}

/// Band-wise 2-D circular convolution `B`, applied in the frequency domain.
pub struct Blur {
    dims: CubeDims,
    radius: usize,
    kernel: Vec<f64>,
    plan: Option<FftPlan>,
}

impl std::fmt::Debug for Blur {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Blur")
            .field("dims", &self.dims)
            .field("radius", &self.radius)
            .field("identity", &self.plan.is_none())
            .finish()
    }
}

impl Blur {
    pub fn new(dims: CubeDims, spec: &BlurSpec) -> Result<Self> {
        match *spec {
            BlurSpec::Identity => Ok(Self {
                dims,
                radius: 0,
                kernel: vec![1.0],
                plan: None,
            }),
            BlurSpec::Gaussian { radius, sigma } => {
                Self::with_kernel(dims, radius, gaussian_kernel(radius, sigma)?)
            }
        }
    }

    /// Gaussian blur matched to downsampling ratio `r`.
    pub fn for_ratio(dims: CubeDims, r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::param("downsampling ratio must be >= 1"));
        }
        Self::new(dims, &BlurSpec::for_ratio(r))
    }

    /// Convolution with an arbitrary row-major `(2 radius + 1)^2` kernel.
    pub fn with_kernel(dims: CubeDims, radius: usize, kernel: Vec<f64>) -> Result<Self> {
        let size = 2 * radius + 1;
        if kernel.len() != size * size {
            return Err(Error::dim(format!(
                "kernel has {} taps, expected {}",
                kernel.len(),
                size * size
            )));
        }
        if size > dims.nv || size > dims.nh {
            return Err(Error::param(format!(
                "{size}x{size} blur kernel does not fit a {}x{} image",
                dims.nv, dims.nh
            )));
        }
        if kernel.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("blur kernel".into()));
        }

        let (nv, nh) = (dims.nv, dims.nh);
        let mut planner = FftPlanner::new();
        let mut plan = FftPlan {
            fwd_v: planner.plan_fft_forward(nv),
            inv_v: planner.plan_fft_inverse(nv),
            fwd_h: planner.plan_fft_forward(nh),
            inv_h: planner.plan_fft_inverse(nh),
            transfer: Vec::new(),
        };

        // kernel tap (di, dj) lands at ((di mod nv), (dj mod nh))
        let mut image = vec![Complex::new(0.0, 0.0); nv * nh];
        for i in 0..size {
            for j in 0..size {
                let row = (i + nv - radius) % nv;
                let col = (j + nh - radius) % nh;
                image[col * nv + row].re += kernel[i * size + j];
            }
        }
        let mut transfer = vec![Complex::new(0.0, 0.0); nv * nh];
        plan.forward(&mut image, &mut transfer, nv, nh);
        plan.transfer = transfer;

        Ok(Self {
            dims,
            radius,
            kernel,
            plan: Some(plan),
        })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Row-major `(2 radius + 1)^2` taps.
    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn is_identity(&self) -> bool {
        self.plan.is_none()
    }

    fn convolve(&self, x: &[f64], out: &mut [f64], conjugate: bool) {
        let Some(plan) = &self.plan else {
            out.copy_from_slice(x);
            return;
        };
        let (nv, nh) = (self.dims.nv, self.dims.nh);
        let n = nv * nh;
        let scale = 1.0 / n as f64;
        out.par_chunks_mut(n)
            .zip(x.par_chunks(n))
            .for_each(|(out, band)| {
                let mut buf: Vec<Complex<f64>> =
                    band.iter().map(|&v| Complex::new(v, 0.0)).collect();
                let mut spec = vec![Complex::new(0.0, 0.0); n];
                plan.forward(&mut buf, &mut spec, nv, nh);
                for (s, h) in spec.iter_mut().zip(&plan.transfer) {
                    *s *= if conjugate { h.conj() } else { *h };
                }
                plan.inverse(&mut spec, &mut buf, nv, nh);
                for (o, c) in out.iter_mut().zip(&buf) {
                    *o = c.re * scale;
                }
            });
    }
}

impl FftPlan {
    /// Column-major `src` (clobbered) to row-major spectrum `dst`.
    fn forward(&self, src: &mut [Complex<f64>], dst: &mut [Complex<f64>], nv: usize, nh: usize) {
        self.fwd_v.process(src);
        transpose(src, dst, nv, nh);
        self.fwd_h.process(dst);
    }

    /// Row-major spectrum `src` (clobbered) to unscaled column-major `dst`.
    fn inverse(&self, src: &mut [Complex<f64>], dst: &mut [Complex<f64>], nv: usize, nh: usize) {
        self.inv_h.process(src);
        transpose(src, dst, nh, nv);
        self.inv_v.process(dst);
    }
}

/// `src` holds `cols` runs of length `rows`; `dst` receives `rows` runs of length `cols`.
fn transpose(src: &[Complex<f64>], dst: &mut [Complex<f64>], rows: usize, cols: usize) {
    for c in 0..cols {
        for r in 0..rows {
            dst[r * cols + c] = src[c * rows + r];
        }
    }
}

impl LinearOperator for Blur {
    fn in_dim(&self) -> usize {
        self.dims.len()
    }

    fn out_dim(&self) -> usize {
        self.dims.len()
    }

    fn name(&self) -> &str {
        "B"
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        check_lengths(self, x.len(), out.len(), false);
        self.convolve(x, out, false);
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        check_lengths(self, y.len(), out.len(), true);
        self.convolve(y, out, true);
    }
}
