//! Observation synthesis: degrade a reference cube into a noisy
//! low-resolution cube and a noisy guide.
//!
//! Noise is drawn from `ChaCha20Rng::seed_from_u64(seed)` (rand_chacha 0.9)
//! through `rand_distr::StandardNormal`, all of `n_v` first and then all of
//! `n_g`, each in flat order.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};
use rand_distr::StandardNormal;

use crate::cube::{CubeDims, GuideImage, HsCube};
use crate::error::{Error, Result};
use crate::operators::{Blur, BlurSpec, Downsample, LinearOperator, SpectralResponse};
use crate::prox::distance;

#[derive(Debug, Clone)]
pub struct DegradationSpec {
    pub ratio: usize,
    pub sigma_v: f64,
    pub sigma_g: f64,
    pub response: SpectralResponse,
    pub blur: BlurSpec,
    pub seed: u64,
}

impl DegradationSpec {
    /// Gaussian blur matched to `ratio`.
    pub fn new(
        ratio: usize,
        sigma_v: f64,
        sigma_g: f64,
        response: SpectralResponse,
        seed: u64,
    ) -> Self {
        Self {
            ratio,
            sigma_v,
            sigma_g,
            response,
            blur: BlurSpec::for_ratio(ratio),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.ratio == 0 {
            return Err(Error::param("downsampling ratio must be >= 1"));
        }
        for (name, s) in [("sigma_v", self.sigma_v), ("sigma_g", self.sigma_g)] {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::param(format!(
                    "{name} must be finite and >= 0, got {s}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Observations {
    pub v: HsCube,
    pub g: GuideImage,
    /// `||n_v||`, the radius that makes the truth exactly feasible.
    pub epsilon_oracle: f64,
    /// `||n_g||`.
    pub eta_oracle: f64,
}

/// `v = S B truth + n_v`, `g = R truth + n_g` with i.i.d. Gaussian noise.
pub fn simulate_observations(truth: &HsCube, spec: &DegradationSpec) -> Result<Observations> {
    spec.validate()?;
    let dims = truth.dims();
    if spec.response.hs_bands() != dims.bands {
        return Err(Error::dim(format!(
            "spectral response covers {} bands, cube has {}",
            spec.response.hs_bands(),
            dims.bands
        )));
    }
    let down = Downsample::new(dims, spec.ratio)?;
    let blur = Blur::new(dims, &spec.blur)?;
    let r = spec.response.operator(dims.n_pixels());

    let clean_v = down.apply(&blur.apply(truth.data()));
    let clean_g = r.apply(truth.data());

    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut noisy = |clean: &[f64], sigma: f64| -> Vec<f64> {
        clean
            .iter()
            .map(|&c| {
                let z: f64 = rng.sample(StandardNormal);
                c + sigma * z
            })
            .collect()
    };
    let v = noisy(&clean_v, spec.sigma_v);
    let g = noisy(&clean_g, spec.sigma_g);

    let epsilon_oracle = distance(&v, &clean_v);
    let eta_oracle = distance(&g, &clean_g);
    Ok(Observations {
        v: HsCube::from_dims(v, down.low_dims())?,
        g: HsCube::from_dims(g, dims.with_bands(spec.response.guide_bands()))?.into(),
        epsilon_oracle,
        eta_oracle,
    })
}

/// Expected noise norms `(sigma_v sqrt(len v), sigma_g sqrt(len g))`.
pub fn blind_radii(sigma_v: f64, sigma_g: f64, v_len: usize, g_len: usize) -> (f64, f64) {
    (
        sigma_v * (v_len as f64).sqrt(),
        sigma_g * (g_len as f64).sqrt(),
    )
}

/// Zero-order-hold upsampling: every low-resolution pixel fills its `r x r` block.
pub fn upsample_nearest(v: &HsCube, ratio: usize) -> Result<HsCube> {
    if ratio == 0 {
        return Err(Error::param("upsampling ratio must be >= 1"));
    }
    let low = v.dims();
    let dims = CubeDims::new(low.nv * ratio, low.nh * ratio, low.bands)?;
    let mut out = vec![0.0; dims.len()];
    for (band, dst) in out.chunks_exact_mut(dims.n_pixels()).enumerate() {
        let src = v.band(band);
        for c in 0..dims.nh {
            for r in 0..dims.nv {
                dst[c * dims.nv + r] = src[(c / ratio) * low.nv + r / ratio];
            }
        }
    }
    HsCube::from_dims(out, dims)
}

/// Synthetic scene layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    /// Every sample is 0.5.
    Constant,
    /// A 4x4 grid of rectangular regions, each with its own smooth spectrum.
    Blocks,
    /// `Blocks` plus a low-amplitude spatial ripple.
    Textured,
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Pattern::Constant),
            "blocks" => Ok(Pattern::Blocks),
            "textured" => Ok(Pattern::Textured),
            other => Err(Error::param(format!(
                "unknown pattern {other:?} (constant|blocks|textured)"
            ))),
        }
    }
}

impl Pattern {
    pub fn as_str(self) -> &'static str {
        match self {
            Pattern::Constant => "constant",
            Pattern::Blocks => "blocks",
            Pattern::Textured => "textured",
        }
    }
}

pub const BLOCK_GRID: usize = 4;

/// Region index of 0-based row (or column) `i` out of `n`.
#[inline]
pub fn block_of(i: usize, n: usize) -> usize {
    i * BLOCK_GRID / n
}

/// Deterministic synthetic cube with samples in `[0, 1]`.
pub fn make_test_cube(
    nv: usize,
    nh: usize,
    bands: usize,
    pattern: Pattern,
    seed: u64,
) -> Result<HsCube> {
    let dims = CubeDims::new(nv, nh, bands)?;
    if pattern == Pattern::Constant {
        return Ok(HsCube::filled(dims, 0.5));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spectra: Vec<Vec<f64>> = (0..BLOCK_GRID * BLOCK_GRID)
        .map(|_| {
            let base = rng.random_range(0.25..0.75);
            let amp = rng.random_range(0.02..0.2);
            let freq = rng.random_range(0.3..1.5);
            let phase = rng.random_range(0.0..2.0 * PI);
            (0..bands)
                .map(|k| {
                    let t = k as f64 / bands as f64;
                    base + amp * (2.0 * PI * freq * t + phase).sin()
                })
                .collect()
        })
        .collect();
    let ripple_phase = rng.random_range(0.0..2.0 * PI);

    let mut data = vec![0.0; dims.len()];
    for k in 0..bands {
        for c in 0..nh {
            for r in 0..nv {
                let region = block_of(r, nv) * BLOCK_GRID + block_of(c, nh);
                let mut value = spectra[region][k];
                if pattern == Pattern::Textured {
                    value += 0.03 * (0.9 * r as f64 + 0.4 * c as f64 + ripple_phase).sin();
                }
                data[k * dims.n_pixels() + c * nv + r] = value.clamp(0.0, 1.0);
            }
        }
    }
    HsCube::from_dims(data, dims)
}
