//! Dense-matrix reference implementations.
//!
//! Every matrix here is assembled entry by entry from index formulas and
//! shares no code with the matrix-free operators, so agreement between the
//! two is meaningful. Intended for instances of a few hundred unknowns.

use crate::cube::CubeDims;
use crate::error::Result;
use crate::operators::{gaussian_kernel, BlurSpec, LinearOperator};
use crate::solver::{FusionProblem, HsstvNorm, SolverState};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Materializes `op` by applying it to every unit vector.
    pub fn from_operator(op: &dyn LinearOperator) -> Self {
        let mut m = Self::zeros(op.out_dim(), op.in_dim());
        let mut e = vec![0.0; op.in_dim()];
        for j in 0..op.in_dim() {
            e[j] = 1.0;
            for (i, v) in op.apply(&e).into_iter().enumerate() {
                m.set(i, j, v);
            }
            e[j] = 0.0;
        }
        m
    }

    /// Materializes the adjoint of `op` the same way.
    pub fn from_adjoint(op: &dyn LinearOperator) -> Self {
        let mut m = Self::zeros(op.in_dim(), op.out_dim());
        let mut e = vec![0.0; op.out_dim()];
        for j in 0..op.out_dim() {
            e[j] = 1.0;
            for (i, v) in op.adjoint(&e).into_iter().enumerate() {
                m.set(i, j, v);
            }
            e[j] = 0.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "dense apply: length mismatch");
        self.data
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "dense matmul: inner dimension");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a != 0.0 {
                    for j in 0..other.cols {
                        out.add(i, j, a * other.get(k, j));
                    }
                }
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(parts: &[&DenseMatrix]) -> Self {
        let cols = parts[0].cols;
        assert!(
            parts.iter().all(|p| p.cols == cols),
            "vstack: column mismatch"
        );
        let mut data = Vec::new();
        for p in parts {
            data.extend_from_slice(&p.data);
        }
        Self {
            rows: parts.iter().map(|p| p.rows).sum(),
            cols,
            data,
        }
    }

    /// `[a b]`.
    pub fn hstack(a: &DenseMatrix, b: &DenseMatrix) -> Self {
        assert_eq!(a.rows, b.rows, "hstack: row mismatch");
        let mut out = Self::zeros(a.rows, a.cols + b.cols);
        for i in 0..a.rows {
            for j in 0..a.cols {
                out.set(i, j, a.get(i, j));
            }
            for j in 0..b.cols {
                out.set(i, a.cols + j, b.get(i, j));
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[inline]
fn at(dims: CubeDims, row: usize, col: usize, band: usize) -> usize {
    band * dims.nv * dims.nh + col * dims.nv + row
}

/// `[D_v; D_h]` with zero rows on the last row / column.
pub fn spatial_diff(dims: CubeDims) -> DenseMatrix {
    let nb = dims.len();
    let mut m = DenseMatrix::zeros(2 * nb, nb);
    for k in 0..dims.bands {
        for c in 0..dims.nh {
            for r in 0..dims.nv {
                let i = at(dims, r, c, k);
                if r + 1 < dims.nv {
                    m.set(i, at(dims, r + 1, c, k), 1.0);
                    m.set(i, i, -1.0);
                }
                if c + 1 < dims.nh {
                    m.set(nb + i, at(dims, r, c + 1, k), 1.0);
                    m.set(nb + i, i, -1.0);
                }
            }
        }
    }
    m
}

/// Forward difference along bands with a zero last band.
pub fn spectral_diff(dims: CubeDims) -> DenseMatrix {
    let nb = dims.len();
    let mut m = DenseMatrix::zeros(nb, nb);
    for k in 0..dims.bands.saturating_sub(1) {
        for c in 0..dims.nh {
            for r in 0..dims.nv {
                let i = at(dims, r, c, k);
                m.set(i, at(dims, r, c, k + 1), 1.0);
                m.set(i, i, -1.0);
            }
        }
    }
    m
}

/// `[D D_b; omega D]`.
pub fn hsstv(dims: CubeDims, omega: f64) -> DenseMatrix {
    let d = spatial_diff(dims);
    DenseMatrix::vstack(&[&d.matmul(&spectral_diff(dims)), &d.scaled(omega)])
}

/// Circular convolution of every band with the row-major
/// `(2 radius + 1)^2` kernel: `(B u)(r, c) = sum K[a, b] u(r - a + radius, c - b + radius)`.
pub fn blur(dims: CubeDims, radius: usize, kernel: &[f64]) -> DenseMatrix {
    let size = 2 * radius + 1;
    assert_eq!(kernel.len(), size * size, "kernel size");
    let nb = dims.len();
    let mut m = DenseMatrix::zeros(nb, nb);
    let wrap = |i: isize, n: usize| i.rem_euclid(n as isize) as usize;
    for k in 0..dims.bands {
        for c in 0..dims.nh {
            for r in 0..dims.nv {
                for a in 0..size {
                    for b in 0..size {
                        let sr = wrap(r as isize - a as isize + radius as isize, dims.nv);
                        let sc = wrap(c as isize - b as isize + radius as isize, dims.nh);
                        m.add(at(dims, r, c, k), at(dims, sr, sc, k), kernel[a * size + b]);
                    }
                }
            }
        }
    }
    m
}

/// Dense `B` for a [`BlurSpec`].
pub fn blur_for(dims: CubeDims, spec: &BlurSpec) -> Result<DenseMatrix> {
    match *spec {
        BlurSpec::Identity => Ok(DenseMatrix::identity(dims.len())),
        BlurSpec::Gaussian { radius, sigma } => {
            Ok(blur(dims, radius, &gaussian_kernel(radius, sigma)?))
        }
    }
}

/// Keeps the top-left sample of every `ratio x ratio` block.
pub fn downsample(dims: CubeDims, ratio: usize) -> DenseMatrix {
    let (lv, lh) = (dims.nv / ratio, dims.nh / ratio);
    let low = CubeDims {
        nv: lv,
        nh: lh,
        bands: dims.bands,
    };
    let mut m = DenseMatrix::zeros(low.len(), dims.len());
    for k in 0..dims.bands {
        for c in 0..lh {
            for r in 0..lv {
                m.set(at(low, r, c, k), at(dims, r * ratio, c * ratio, k), 1.0);
            }
        }
    }
    m
}

/// Pixelwise mixing with the row-major `out_bands x in_bands` matrix `w`.
pub fn spectral_mix(n_pixels: usize, out_bands: usize, in_bands: usize, w: &[f64]) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(n_pixels * out_bands, n_pixels * in_bands);
    for i in 0..out_bands {
        for k in 0..in_bands {
            for j in 0..n_pixels {
                m.set(i * n_pixels + j, k * n_pixels + j, w[i * in_bands + k]);
            }
        }
    }
    m
}

/// Keeps bands `lo..=hi` (1-based).
pub fn band_select(dims: CubeDims, lo: usize, hi: usize) -> DenseMatrix {
    let n = dims.n_pixels();
    let mut m = DenseMatrix::zeros(n * (hi - lo + 1), dims.len());
    for (out_band, band) in (lo - 1..hi).enumerate() {
        for j in 0..n {
            m.set(out_band * n + j, band * n + j, 1.0);
        }
    }
    m
}

/// Transposed response restricted to bands `lo..=hi`, rows scaled to unit sum.
pub fn guide_lift(n_pixels: usize, response: &[Vec<f64>], lo: usize, hi: usize) -> DenseMatrix {
    let guide_bands = response.len();
    let mut w = Vec::new();
    for k in lo - 1..hi {
        let total: f64 = response.iter().map(|row| row[k]).sum();
        w.extend(response.iter().map(|row| row[k] / total));
    }
    spectral_mix(n_pixels, hi - lo + 1, guide_bands, &w)
}

/// The operators of a [`FusionProblem`], assembled densely from its parameters.
#[derive(Debug, Clone)]
pub struct DenseProblem {
    pub a_omega: DenseMatrix,
    pub d_selected: DenseMatrix,
    pub d_guide: DenseMatrix,
    pub blur: DenseMatrix,
    pub down: DenseMatrix,
    pub response: DenseMatrix,
    pub select: DenseMatrix,
    pub lift: DenseMatrix,
    /// The stacked `L` acting on `(u, q)`.
    pub stacked: DenseMatrix,
    /// Row counts of the five dual blocks.
    pub blocks: [usize; 5],
}

impl DenseProblem {
    pub fn new(problem: &FusionProblem) -> Result<Self> {
        let p = problem.params();
        let dims = p.dims;
        let n = dims.n_pixels();
        let (lo, hi) = p.guide_range;
        let gb = p.response.guide_bands();
        let rows: Vec<Vec<f64>> = p.response.rows().map(|r| r.to_vec()).collect();
        let flat: Vec<f64> = rows.concat();

        let sel_dims = CubeDims {
            bands: hi - lo + 1,
            ..dims
        };
        let guide_dims = CubeDims { bands: gb, ..dims };
        let a_omega = hsstv(dims, p.omega);
        let d_selected = spatial_diff(sel_dims);
        let d_guide = spatial_diff(guide_dims);
        let blur = blur_for(dims, &p.blur)?;
        let down = downsample(dims, p.ratio);
        let response = spectral_mix(n, gb, dims.bands, &flat);
        let select = band_select(dims, lo, hi);
        let lift = guide_lift(n, &rows, lo, hi);

        let nq = guide_dims.len();
        let sb = down.matmul(&blur);
        let stacked = DenseMatrix::vstack(&[
            &DenseMatrix::hstack(&a_omega, &DenseMatrix::zeros(a_omega.rows(), nq)),
            &DenseMatrix::hstack(
                &d_selected.matmul(&select),
                &d_selected.matmul(&lift).scaled(-1.0),
            ),
            &DenseMatrix::hstack(&DenseMatrix::zeros(d_guide.rows(), dims.len()), &d_guide),
            &DenseMatrix::hstack(&sb, &DenseMatrix::zeros(sb.rows(), nq)),
            &DenseMatrix::hstack(
                &DenseMatrix::zeros(nq, dims.len()),
                &DenseMatrix::identity(nq),
            ),
        ]);
        let blocks = [
            a_omega.rows(),
            d_selected.rows(),
            d_guide.rows(),
            sb.rows(),
            nq,
        ];
        Ok(Self {
            a_omega,
            d_selected,
            d_guide,
            blur,
            down,
            response,
            select,
            lift,
            stacked,
            blocks,
        })
    }
}

/// Projects every group `{i + j * block}` of `y` onto the ℓ2 ball of `radius`.
fn project_groups(y: &mut [f64], group_size: usize, radius: f64) {
    let block = y.len() / group_size;
    for i in 0..block {
        let norm = (0..group_size)
            .map(|j| y[i + j * block] * y[i + j * block])
            .sum::<f64>()
            .sqrt();
        if norm > radius {
            for j in 0..group_size {
                y[i + j * block] *= radius / norm;
            }
        }
    }
}

/// `w - gamma P_{B(c, r)}(w / gamma)`: the conjugate step of a ball indicator.
fn ball_conjugate_step(w: &mut [f64], center: &[f64], radius: f64, gamma: f64) {
    let dist = w
        .iter()
        .zip(center)
        .map(|(a, c)| (a / gamma - c).powi(2))
        .sum::<f64>()
        .sqrt();
    let s = if dist > radius { radius / dist } else { 1.0 };
    for (a, c) in w.iter_mut().zip(center) {
        let z = *a / gamma;
        *a -= gamma * (c + s * (z - c));
    }
}

/// One primal-dual iteration computed with dense matrices.
///
/// The conjugate steps use their closed forms (projections onto dual-norm
/// balls) rather than the Moreau route taken by the solver.
pub fn pds_step(
    problem: &FusionProblem,
    dense: &DenseProblem,
    state: &SolverState,
    v: &[f64],
    g: &[f64],
    gamma1: f64,
    gamma2: f64,
) -> SolverState {
    let p = problem.params();
    let nb = state.u.len();
    let x: Vec<f64> = state.u.iter().chain(&state.q).copied().collect();
    let y: Vec<f64> = [&state.y1, &state.y2, &state.y3, &state.y4, &state.y5]
        .into_iter()
        .flatten()
        .copied()
        .collect();

    let lty = dense.stacked.transpose().apply(&y);
    let mut x_new: Vec<f64> = x.iter().zip(&lty).map(|(a, d)| a - gamma1 * d).collect();
    for (i, xi) in x_new.iter_mut().enumerate() {
        let b = if i < nb { p.u_bounds } else { p.q_bounds };
        *xi = xi.clamp(b.lo, b.hi);
    }

    let x_bar: Vec<f64> = x_new.iter().zip(&x).map(|(n, o)| 2.0 * n - o).collect();
    let lx = dense.stacked.apply(&x_bar);
    let mut y_new: Vec<f64> = y.iter().zip(&lx).map(|(a, b)| a + gamma2 * b).collect();

    let mut blocks = Vec::with_capacity(5);
    let mut rest = y_new.as_mut_slice();
    for len in dense.blocks {
        let (head, tail) = rest.split_at_mut(len);
        blocks.push(head);
        rest = tail;
    }
    let [y1, y2, y3, y4, y5]: [&mut [f64]; 5] = blocks.try_into().expect("five blocks");
    match p.norm {
        HsstvNorm::L1 => y1.iter_mut().for_each(|a| *a = a.clamp(-1.0, 1.0)),
        HsstvNorm::L12 => project_groups(y1, 4, 1.0),
    }
    project_groups(y2, 2, p.lambda);
    project_groups(y3, 2, p.rho);
    ball_conjugate_step(y4, v, p.epsilon, gamma2);
    ball_conjugate_step(y5, g, p.eta, gamma2);

    let [s1, s2, s3, s4, s5] = [
        y1.to_vec(),
        y2.to_vec(),
        y3.to_vec(),
        y4.to_vec(),
        y5.to_vec(),
    ];
    SolverState {
        u: x_new[..nb].to_vec(),
        q: x_new[nb..].to_vec(),
        y1: s1,
        y2: s2,
        y3: s3,
        y4: s4,
        y5: s5,
        iteration: state.iteration + 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_matrices() {
        let dims = CubeDims::new(2, 2, 2).unwrap();
        let d = spatial_diff(dims);
        // column of 1s in the top-left pixel of band 0
        let u = [1.0, 3.0, 2.0, 5.0, 0.0, 0.0, 0.0, 0.0];
        let du = d.apply(&u);
        assert_eq!(&du[..4], &[2.0, 0.0, 3.0, 0.0]);
        assert_eq!(&du[8..12], &[1.0, 2.0, 0.0, 0.0]);
        let s = downsample(CubeDims::new(4, 4, 1).unwrap(), 2);
        assert_eq!(s.rows(), 4);
        assert_eq!(s.get(1, 2), 1.0);
    }

    #[test]
    fn blur_rows_sum_to_one() {
        let dims = CubeDims::new(3, 3, 1).unwrap();
        let k = gaussian_kernel(1, 0.7).unwrap();
        let b = blur(dims, 1, &k);
        for i in 0..b.rows() {
            let s: f64 = (0..b.cols()).map(|j| b.get(i, j)).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }
}
