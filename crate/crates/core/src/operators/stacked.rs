use std::ops::Range;

use super::{
    check_lengths, BandSelect, Blur, Downsample, Hsstv, LinearOperator, SpatialDiff, SpectralMix,
};
use crate::cube::CubeDims;
use crate::error::{Error, Result};

/// Block offsets of the dual vector `(y1, y2, y3, y4, y5)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DualLayout {
    pub sizes: [usize; 5],
}

impl DualLayout {
    pub fn range(&self, block: usize) -> Range<usize> {
        let start: usize = self.sizes[..block].iter().sum();
        start..start + self.sizes[block]
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn split<'a>(&self, y: &'a [f64]) -> [&'a [f64]; 5] {
        std::array::from_fn(|i| &y[self.range(i)])
    }

    pub fn split_mut<'a>(&self, y: &'a mut [f64]) -> [&'a mut [f64]; 5] {
        let (y1, rest) = y.split_at_mut(self.sizes[0]);
        let (y2, rest) = rest.split_at_mut(self.sizes[1]);
        let (y3, rest) = rest.split_at_mut(self.sizes[2]);
        let (y4, y5) = rest.split_at_mut(self.sizes[3]);
        [y1, y2, y3, y4, y5]
    }
}

/// The full constraint/regularizer map
/// `L(u, q) = (A_ω u, D M_u u - D M q, D q, S B u, q)`.
///
/// Input is `u` (length `NB`) followed by `q` (length `Nb`).
#[derive(Debug)]
pub struct StackedOperator {
    dims: CubeDims,
    guide_dims: CubeDims,
    hsstv: Hsstv,
    select: BandSelect,
    lift: SpectralMix,
    diff_selected: SpatialDiff,
    diff_guide: SpatialDiff,
    blur: Blur,
    down: Downsample,
    layout: DualLayout,
}

impl StackedOperator {
    pub fn new(
        hsstv: Hsstv,
        select: BandSelect,
        lift: SpectralMix,
        guide_bands: usize,
        blur: Blur,
        down: Downsample,
    ) -> Result<Self> {
        let dims = hsstv.dims();
        let nb = dims.len();
        let n = dims.n_pixels();
        let guide_dims = dims.with_bands(guide_bands);
        let sel_dims = select.out_dims();

        let mismatch = |what: &str, got: usize, want: usize| {
            Err(Error::dim(format!(
                "{what}: operator dimension {got}, expected {want}"
            )))
        };
        if select.in_dim() != nb {
            return mismatch("M_u input", select.in_dim(), nb);
        }
        if lift.in_dim() != guide_dims.len() {
            return mismatch("M input", lift.in_dim(), guide_dims.len());
        }
        if lift.out_dim() != sel_dims.len() {
            return mismatch("M output", lift.out_dim(), sel_dims.len());
        }
        if blur.in_dim() != nb {
            return mismatch("B input", blur.in_dim(), nb);
        }
        if down.in_dim() != nb {
            return mismatch("S input", down.in_dim(), nb);
        }

        let layout = DualLayout {
            sizes: [
                4 * nb,
                2 * sel_dims.len(),
                2 * guide_bands * n,
                down.out_dim(),
                guide_bands * n,
            ],
        };
        Ok(Self {
            dims,
            guide_dims,
            diff_selected: SpatialDiff::new(sel_dims),
            diff_guide: SpatialDiff::new(guide_dims),
            hsstv,
            select,
            lift,
            blur,
            down,
            layout,
        })
    }

    pub fn layout(&self) -> DualLayout {
        self.layout
    }

    pub fn dims(&self) -> CubeDims {
        self.dims
    }

    pub fn guide_dims(&self) -> CubeDims {
        self.guide_dims
    }

    pub fn hsstv(&self) -> &Hsstv {
        &self.hsstv
    }

    pub fn band_select(&self) -> &BandSelect {
        &self.select
    }

    pub fn guide_lift(&self) -> &SpectralMix {
        &self.lift
    }

    pub fn blur(&self) -> &Blur {
        &self.blur
    }

    pub fn downsample(&self) -> &Downsample {
        &self.down
    }

    /// `D` acting on the selected-band cube (`N B'` samples).
    pub fn diff_selected(&self) -> &SpatialDiff {
        &self.diff_selected
    }

    /// `D` acting on the guide (`N b` samples).
    pub fn diff_guide(&self) -> &SpatialDiff {
        &self.diff_guide
    }

    /// `S B u`.
    pub fn observe(&self, u: &[f64]) -> Vec<f64> {
        self.down.apply(&self.blur.apply(u))
    }

    /// `B^T S^T v`.
    pub fn observe_adjoint(&self, v: &[f64]) -> Vec<f64> {
        self.blur.adjoint(&self.down.adjoint(v))
    }

    /// `M_u u - M q`, the argument of the edge-similarity differences.
    pub fn edge_residual(&self, u: &[f64], q: &[f64]) -> Vec<f64> {
        let mut t = self.select.apply(u);
        let lifted = self.lift.apply(q);
        t.iter_mut().zip(&lifted).for_each(|(a, b)| *a -= b);
        t
    }
}

impl LinearOperator for StackedOperator {
    fn in_dim(&self) -> usize {
        self.dims.len() + self.guide_dims.len()
    }

    fn out_dim(&self) -> usize {
        self.layout.len()
    }

    fn name(&self) -> &str {
        "L"
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        check_lengths(self, x.len(), out.len(), false);
        let (u, q) = x.split_at(self.dims.len());
        let [y1, y2, y3, y4, y5] = self.layout.split_mut(out);
        self.hsstv.apply_into(u, y1);
        self.diff_selected.apply_into(&self.edge_residual(u, q), y2);
        self.diff_guide.apply_into(q, y3);
        self.down.apply_into(&self.blur.apply(u), y4);
        y5.copy_from_slice(q);
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        check_lengths(self, y.len(), out.len(), true);
        let [y1, y2, y3, y4, y5] = self.layout.split(y);
        let (u, q) = out.split_at_mut(self.dims.len());

        self.hsstv.adjoint_into(y1, u);
        let edge = self.diff_selected.adjoint(y2);
        let from_edge = self.select.adjoint(&edge);
        let from_obs = self.observe_adjoint(y4);
        for ((o, a), b) in u.iter_mut().zip(&from_edge).zip(&from_obs) {
            *o += a + b;
        }

        self.diff_guide.adjoint_into(y3, q);
        let lifted = self.lift.adjoint(&edge);
        for ((o, l), v) in q.iter_mut().zip(&lifted).zip(y5) {
            *o += v - l;
        }
    }
}
