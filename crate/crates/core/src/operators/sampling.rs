use super::{check_lengths, LinearOperator};
use crate::cube::CubeDims;
use crate::error::{Error, Result};

/// Decimation `S` by `r` in both spatial directions.
///
/// Keeps the top-left sample of each `r x r` block; the adjoint zero-fills.
#[derive(Debug, Clone)]
pub struct Downsample {
    dims: CubeDims,
    ratio: usize,
}

impl Downsample {
    pub fn new(dims: CubeDims, ratio: usize) -> Result<Self> {
        if ratio == 0 {
            return Err(Error::param("downsampling ratio must be >= 1"));
        }
        if !dims.nv.is_multiple_of(ratio) || !dims.nh.is_multiple_of(ratio) {
            return Err(Error::dim(format!(
                "ratio {ratio} does not divide the {}x{} image",
                dims.nv, dims.nh
            )));
        }
        Ok(Self { dims, ratio })
    }

    pub fn ratio(&self) -> usize {
        self.ratio
    }

    pub fn low_dims(&self) -> CubeDims {
        CubeDims {
            nv: self.dims.nv / self.ratio,
            nh: self.dims.nh / self.ratio,
            bands: self.dims.bands,
        }
    }
}

impl LinearOperator for Downsample {
    fn in_dim(&self) -> usize {
        self.dims.len()
    }

    fn out_dim(&self) -> usize {
        self.low_dims().len()
    }

    fn name(&self) -> &str {
        "S"
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        check_lengths(self, x.len(), out.len(), false);
        let low = self.low_dims();
        let (nv, r) = (self.dims.nv, self.ratio);
        for (band, lo) in x
            .chunks_exact(self.dims.n_pixels())
            .zip(out.chunks_exact_mut(low.n_pixels()))
        {
            for c in 0..low.nh {
                for row in 0..low.nv {
                    lo[c * low.nv + row] = band[c * r * nv + row * r];
                }
            }
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        check_lengths(self, y.len(), out.len(), true);
        out.fill(0.0);
        let low = self.low_dims();
        let (nv, r) = (self.dims.nv, self.ratio);
        for (band, lo) in out
            .chunks_exact_mut(self.dims.n_pixels())
            .zip(y.chunks_exact(low.n_pixels()))
        {
            for c in 0..low.nh {
                for row in 0..low.nv {
                    band[c * r * nv + row * r] = lo[c * low.nv + row];
                }
            }
        }
    }
}

/// `M_u`: copies the contiguous band block `[lo, hi]` (1-based, inclusive).
#[derive(Debug, Clone)]
pub struct BandSelect {
    dims: CubeDims,
    first: usize,
    count: usize,
}

impl BandSelect {
    pub fn new(dims: CubeDims, band_lo: usize, band_hi: usize) -> Result<Self> {
        if band_lo == 0 || band_lo > band_hi || band_hi > dims.bands {
            return Err(Error::Index(format!(
                "band range [{band_lo}, {band_hi}] invalid for {} bands",
                dims.bands
            )));
        }
        Ok(Self {
            dims,
            first: band_lo - 1,
            count: band_hi - band_lo + 1,
        })
    }

    pub fn selected_bands(&self) -> usize {
        self.count
    }

    pub fn out_dims(&self) -> CubeDims {
        self.dims.with_bands(self.count)
    }
}

impl LinearOperator for BandSelect {
    fn in_dim(&self) -> usize {
        self.dims.len()
    }

    fn out_dim(&self) -> usize {
        self.dims.n_pixels() * self.count
    }

    fn name(&self) -> &str {
        "M_u"
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        check_lengths(self, x.len(), out.len(), false);
        let n = self.dims.n_pixels();
        out.copy_from_slice(&x[self.first * n..(self.first + self.count) * n]);
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        check_lengths(self, y.len(), out.len(), true);
        let n = self.dims.n_pixels();
        out.fill(0.0);
        out[self.first * n..(self.first + self.count) * n].copy_from_slice(y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_one_is_identity() {
        let dims = CubeDims::new(3, 5, 2).unwrap();
        let s = Downsample::new(dims, 1).unwrap();
        let x: Vec<f64> = (0..dims.len()).map(|i| i as f64).collect();
        assert_eq!(s.apply(&x), x);
        assert_eq!(s.adjoint(&x), x);
    }

    #[test]
    fn keeps_odd_rows_and_columns() {
        // 4x4 band with value 10*row + col (1-based) stored column-major
        let dims = CubeDims::new(4, 4, 1).unwrap();
        let mut x = vec![0.0; 16];
        for c in 0..4 {
            for r in 0..4 {
                x[c * 4 + r] = (10 * (r + 1) + (c + 1)) as f64;
            }
        }
        let y = Downsample::new(dims, 2).unwrap().apply(&x);
        assert_eq!(y, vec![11.0, 31.0, 13.0, 33.0]);
    }

    #[test]
    fn adjoint_of_apply_keeps_one_sample_per_block() {
        let dims = CubeDims::new(6, 6, 3).unwrap();
        let s = Downsample::new(dims, 3).unwrap();
        let x: Vec<f64> = (0..dims.len()).map(|i| 1.0 + i as f64).collect();
        let back = s.adjoint(&s.apply(&x));
        for band in back.chunks(36) {
            assert_eq!(band.iter().filter(|&&v| v != 0.0).count(), 4);
        }
        // S S^T = I
        let lo: Vec<f64> = (0..s.out_dim()).map(|i| i as f64 - 3.5).collect();
        assert_eq!(s.apply(&s.adjoint(&lo)), lo);
    }

    #[test]
    fn non_divisible_dims_are_rejected() {
        let dims = CubeDims::new(6, 5, 1).unwrap();
        assert!(matches!(Downsample::new(dims, 2), Err(Error::Dimension(_))));
        assert!(Downsample::new(dims, 0).is_err());
    }

    #[test]
    fn band_selection() {
        let dims = CubeDims::new(2, 1, 3).unwrap();
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let full = BandSelect::new(dims, 1, 3).unwrap();
        assert_eq!(full.apply(&x), x.to_vec());
        let mid = BandSelect::new(dims, 2, 2).unwrap();
        assert_eq!(mid.apply(&x), vec![3.0, 4.0]);
        assert_eq!(mid.adjoint(&[7.0, 8.0]), vec![0.0, 0.0, 7.0, 8.0, 0.0, 0.0]);
        assert!(BandSelect::new(dims, 0, 2).is_err());
        assert!(BandSelect::new(dims, 3, 2).is_err());
        assert!(BandSelect::new(dims, 2, 4).is_err());
    }
}
