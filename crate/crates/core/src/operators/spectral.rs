use super::{check_lengths, LinearOperator};
use crate::error::{Error, Result};

/// Nonnegative `guide_bands x hs_bands` weights describing how each guide
/// band integrates the hyperspectral bands.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResponse {
    guide_bands: usize,
    hs_bands: usize,
    weights: Vec<f64>,
}

impl SpectralResponse {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let guide_bands = rows.len();
        if guide_bands == 0 {
            return Err(Error::dim("spectral response has no rows"));
        }
        let hs_bands = rows[0].len();
        if hs_bands == 0 {
            return Err(Error::dim("spectral response has no columns"));
        }
        let mut weights = Vec::with_capacity(guide_bands * hs_bands);
        for (j, row) in rows.into_iter().enumerate() {
            if row.len() != hs_bands {
                return Err(Error::dim(format!(
                    "response row {} has {} entries, expected {hs_bands}",
                    j + 1,
                    row.len()
                )));
            }
            if row.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(Error::param(format!(
                    "response row {} has a negative or non-finite weight",
                    j + 1
                )));
            }
            if row.iter().all(|&w| w == 0.0) {
                return Err(Error::param(format!("response row {} is all zero", j + 1)));
            }
            weights.extend(row);
        }
        Ok(Self {
            guide_bands,
            hs_bands,
            weights,
        })
    }

    /// Single-band response averaging HS bands `[lo, hi]` (1-based, inclusive).
    pub fn pan_average(hs_bands: usize, lo: usize, hi: usize) -> Result<Self> {
        if lo == 0 || lo > hi || hi > hs_bands {
            return Err(Error::Index(format!(
                "band range [{lo}, {hi}] invalid for {hs_bands} bands"
            )));
        }
        let w = 1.0 / (hi - lo + 1) as f64;
        let row = (1..=hs_bands)
            .map(|k| if (lo..=hi).contains(&k) { w } else { 0.0 })
            .collect();
        Self::new(vec![row])
    }

    /// Default PAN range: the first `ceil(B / 2)` bands.
    pub fn default_pan_range(hs_bands: usize) -> (usize, usize) {
        (1, hs_bands.div_ceil(2).max(1))
    }

    /// `guide_bands` contiguous, equally wide averaging windows tiling all HS bands.
    pub fn uniform_windows(hs_bands: usize, guide_bands: usize) -> Result<Self> {
        if guide_bands == 0 || guide_bands > hs_bands {
            return Err(Error::param(format!(
                "cannot split {hs_bands} bands into {guide_bands} windows"
            )));
        }
        let rows = (0..guide_bands)
            .map(|j| {
                let lo = j * hs_bands / guide_bands;
                let hi = (j + 1) * hs_bands / guide_bands;
                let w = 1.0 / (hi - lo) as f64;
                (0..hs_bands)
                    .map(|k| if (lo..hi).contains(&k) { w } else { 0.0 })
                    .collect()
            })
            .collect();
        Self::new(rows)
    }

    pub fn guide_bands(&self) -> usize {
        self.guide_bands
    }

    pub fn hs_bands(&self) -> usize {
        self.hs_bands
    }

    /// Weight of 0-based HS band `k` in 0-based guide band `j`.
    #[inline]
    pub fn weight(&self, j: usize, k: usize) -> f64 {
        self.weights[j * self.hs_bands + k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.chunks_exact(self.hs_bands)
    }

    /// Smallest 1-based band interval containing every nonzero weight.
    pub fn support(&self) -> (usize, usize) {
        let active = |k: usize| (0..self.guide_bands).any(|j| self.weight(j, k) != 0.0);
        let lo = (0..self.hs_bands)
            .find(|&k| active(k))
            .expect("rows are nonzero");
        let hi = (0..self.hs_bands)
            .rev()
            .find(|&k| active(k))
            .expect("rows are nonzero");
        (lo + 1, hi + 1)
    }

    /// The guide-forming operator `R` for images with `n_pixels` pixels.
    pub fn operator(&self, n_pixels: usize) -> SpectralMix {
        SpectralMix::from_parts(
            "R",
            self.guide_bands,
            self.hs_bands,
            self.weights.clone(),
            n_pixels,
        )
    }

    /// The lifting operator `M`: transpose the response, keep HS bands
    /// `[lo, hi]`, and scale each remaining row to unit sum.
    pub fn guide_lift(&self, lo: usize, hi: usize, n_pixels: usize) -> Result<SpectralMix> {
        if lo == 0 || lo > hi || hi > self.hs_bands {
            return Err(Error::Index(format!(
                "band range [{lo}, {hi}] invalid for {} bands",
                self.hs_bands
            )));
        }
        let rows = hi - lo + 1;
        let mut matrix = Vec::with_capacity(rows * self.guide_bands);
        for k in lo - 1..hi {
            let total: f64 = (0..self.guide_bands).map(|j| self.weight(j, k)).sum();
            if total <= 0.0 {
                return Err(Error::DegenerateResponse { band: k + 1 });
            }
            matrix.extend((0..self.guide_bands).map(|j| self.weight(j, k) / total));
        }
        Ok(SpectralMix::from_parts(
            "M",
            rows,
            self.guide_bands,
            matrix,
            n_pixels,
        ))
    }
}

/// Per-pixel spectral mixing: band `i` of the output is `sum_k W[i, k]`
/// times band `k` of the input, for every pixel.
#[derive(Debug, Clone)]
pub struct SpectralMix {
    name: &'static str,
    out_bands: usize,
    in_bands: usize,
    matrix: Vec<f64>,
    n_pixels: usize,
}

impl SpectralMix {
    /// `matrix` is row-major `out_bands x in_bands`.
    pub fn new(
        out_bands: usize,
        in_bands: usize,
        matrix: Vec<f64>,
        n_pixels: usize,
    ) -> Result<Self> {
        if matrix.len() != out_bands * in_bands {
            return Err(Error::dim(format!(
                "mixing matrix has {} entries, expected {out_bands}x{in_bands}",
                matrix.len()
            )));
        }
        Ok(Self::from_parts(
            "mix", out_bands, in_bands, matrix, n_pixels,
        ))
    }

    fn from_parts(
        name: &'static str,
        out_bands: usize,
        in_bands: usize,
        matrix: Vec<f64>,
        n_pixels: usize,
    ) -> Self {
        Self {
            name,
            out_bands,
            in_bands,
            matrix,
            n_pixels,
        }
    }

    pub fn out_bands(&self) -> usize {
        self.out_bands
    }

    pub fn in_bands(&self) -> usize {
        self.in_bands
    }

    pub fn entry(&self, i: usize, k: usize) -> f64 {
        self.matrix[i * self.in_bands + k]
    }
}

impl LinearOperator for SpectralMix {
    fn in_dim(&self) -> usize {
        self.n_pixels * self.in_bands
    }

    fn out_dim(&self) -> usize {
        self.n_pixels * self.out_bands
    }

    fn name(&self) -> &str {
        self.name
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        check_lengths(self, x.len(), out.len(), false);
        let n = self.n_pixels;
        for (i, dst) in out.chunks_exact_mut(n).enumerate() {
            dst.fill(0.0);
            for (k, src) in x.chunks_exact(n).enumerate() {
                let w = self.entry(i, k);
                if w != 0.0 {
                    dst.iter_mut().zip(src).for_each(|(d, s)| *d += w * s);
                }
            }
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        check_lengths(self, y.len(), out.len(), true);
        let n = self.n_pixels;
        for (k, dst) in out.chunks_exact_mut(n).enumerate() {
            dst.fill(0.0);
            for (i, src) in y.chunks_exact(n).enumerate() {
                let w = self.entry(i, k);
                if w != 0.0 {
                    dst.iter_mut().zip(src).for_each(|(d, s)| *d += w * s);
                }
            }
        }
    }
}
