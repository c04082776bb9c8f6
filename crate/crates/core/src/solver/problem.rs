use crate::cube::CubeDims;
use crate::error::{Error, Result};
use crate::operators::{
    BandSelect, Blur, BlurSpec, Downsample, Hsstv, LinearOperator, SpectralResponse,
    StackedOperator,
};
use crate::prox::{group_l12_norm, l1_norm, GroupLayout};

/// Inner norm of the HSSTV mixed norm `||A_ω u||_{1,p}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsstvNorm {
    /// `p = 1`: plain ℓ1 over all components.
    L1,
    /// `p = 2`: ℓ1,2 with the four `A_ω` components of each voxel grouped.
    L12,
}

impl HsstvNorm {
    pub fn from_p(p: u32) -> Result<Self> {
        match p {
            1 => Ok(HsstvNorm::L1),
            2 => Ok(HsstvNorm::L12),
            _ => Err(Error::param(format!(
                "HSSTV norm p must be 1 or 2, got {p}"
            ))),
        }
    }

    pub fn p(self) -> u32 {
        match self {
            HsstvNorm::L1 => 1,
            HsstvNorm::L12 => 2,
        }
    }
}

/// Closed interval for a box constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::param(format!(
                "box bounds need lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }
}

/// Everything needed to build a [`FusionProblem`].
#[derive(Debug, Clone)]
pub struct ProblemParams {
    pub dims: CubeDims,
    pub ratio: usize,
    pub blur: BlurSpec,
    pub response: SpectralResponse,
    /// 1-based inclusive HS band range covered by the guide.
    pub guide_range: (usize, usize),
    pub omega: f64,
    pub norm: HsstvNorm,
    pub lambda: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub u_bounds: Bounds,
    pub q_bounds: Bounds,
}

/// The constrained fusion program
///
/// ```text
/// min_{u,q}  ||A_ω u||_{1,p} + λ ||D M_u u - D M q||_{1,2} + ρ ||D q||_{1,2}
/// s.t.       ||S B u - v|| <= ε,  ||q - g|| <= η,  u ∈ [μu_lo, μu_hi]^{NB},  q ∈ [μq_lo, μq_hi]^{Nb}
/// ```
#[derive(Debug)]
pub struct FusionProblem {
    params: ProblemParams,
    stacked: StackedOperator,
    hsstv_groups: GroupLayout,
    edge_groups: GroupLayout,
    guide_groups: GroupLayout,
}

impl FusionProblem {
    pub fn new(params: ProblemParams) -> Result<Self> {
        let dims = params.dims;
        if params.response.hs_bands() != dims.bands {
            return Err(Error::dim(format!(
                "spectral response covers {} bands, cube has {}",
                params.response.hs_bands(),
                dims.bands
            )));
        }
        for (name, v) in [("lambda", params.lambda), ("rho", params.rho)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("epsilon", params.epsilon), ("eta", params.eta)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::param(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Bounds::new(params.u_bounds.lo, params.u_bounds.hi)?;
        Bounds::new(params.q_bounds.lo, params.q_bounds.hi)?;

        let n = dims.n_pixels();
        let (lo, hi) = params.guide_range;
        let guide_bands = params.response.guide_bands();
        let hsstv = Hsstv::new(dims, params.omega)?;
        let select = BandSelect::new(dims, lo, hi)?;
        let lift = params.response.guide_lift(lo, hi, n)?;
        let blur = Blur::new(dims, &params.blur)?;
        let down = Downsample::new(dims, params.ratio)?;
        let sel_len = select.out_dim();
        let stacked = StackedOperator::new(hsstv, select, lift, guide_bands, blur, down)?;

        Ok(Self {
            hsstv_groups: GroupLayout::blocks(dims.len(), 4)?,
            edge_groups: GroupLayout::blocks(sel_len, 2)?,
            guide_groups: GroupLayout::blocks(n * guide_bands, 2)?,
            params,
            stacked,
        })
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn dims(&self) -> CubeDims {
        self.params.dims
    }

    pub fn guide_dims(&self) -> CubeDims {
        self.stacked.guide_dims()
    }

    pub fn low_dims(&self) -> CubeDims {
        self.stacked.downsample().low_dims()
    }

    pub fn stacked_operator(&self) -> &StackedOperator {
        &self.stacked
    }

    /// Group layout of `y1` (four stacked `NB` blocks).
    pub fn hsstv_groups(&self) -> &GroupLayout {
        &self.hsstv_groups
    }

    /// Group layout of `y2` (two stacked `NB'` blocks).
    pub fn edge_groups(&self) -> &GroupLayout {
        &self.edge_groups
    }

    /// Group layout of `y3` (two stacked `Nb` blocks).
    pub fn guide_groups(&self) -> &GroupLayout {
        &self.guide_groups
    }

    pub fn hsstv_value(&self, u: &[f64]) -> f64 {
        let a = self.stacked.hsstv().apply(u);
        mixed_norm(&a, self.params.norm, &self.hsstv_groups)
    }

    /// Objective value at `(u, q)`, constraints excluded.
    pub fn objective(&self, u: &[f64], q: &[f64]) -> Result<f64> {
        self.check_primal(u, q)?;
        let edge = self
            .stacked
            .diff_selected()
            .apply(&self.stacked.edge_residual(u, q));
        let guide_tv = self.stacked.diff_guide().apply(q);
        Ok(self.hsstv_value(u)
            + self.params.lambda * group_l12_norm(&edge, &self.edge_groups)?
            + self.params.rho * group_l12_norm(&guide_tv, &self.guide_groups)?)
    }

    /// `max(||S B u - v|| - ε, 0)`.
    pub fn v_gap(&self, u: &[f64], v: &[f64]) -> f64 {
        let sbu = self.stacked.observe(u);
        (crate::prox::distance(&sbu, v) - self.params.epsilon).max(0.0)
    }

    /// `max(||q - g|| - η, 0)`.
    pub fn g_gap(&self, q: &[f64], g: &[f64]) -> f64 {
        (crate::prox::distance(q, g) - self.params.eta).max(0.0)
    }

    pub(crate) fn check_primal(&self, u: &[f64], q: &[f64]) -> Result<()> {
        if u.len() != self.dims().len() {
            return Err(Error::dim(format!(
                "u has {} samples, expected {}",
                u.len(),
                self.dims().len()
            )));
        }
        if q.len() != self.guide_dims().len() {
            return Err(Error::dim(format!(
                "q has {} samples, expected {}",
                q.len(),
                self.guide_dims().len()
            )));
        }
        Ok(())
    }
}

fn mixed_norm(a: &[f64], norm: HsstvNorm, groups: &GroupLayout) -> f64 {
    match norm {
        HsstvNorm::L1 => l1_norm(a),
        HsstvNorm::L12 => groups.group_norms(a).sum(),
    }
}

/// `||A_ω u||_{1,p}` for a cube of shape `dims`.
pub fn hsstv_value(u: &[f64], dims: CubeDims, omega: f64, p: u32) -> Result<f64> {
    let norm = HsstvNorm::from_p(p)?;
    if u.len() != dims.len() {
        return Err(Error::dim(format!(
            "u has {} samples, expected {}",
            u.len(),
            dims.len()
        )));
    }
    let a = Hsstv::new(dims, omega)?.apply(u);
    Ok(mixed_norm(&a, norm, &GroupLayout::blocks(dims.len(), 4)?))
}

/// Objective of `problem` at `(u, q)`.
pub fn objective_value(u: &[f64], q: &[f64], problem: &FusionProblem) -> Result<f64> {
    problem.objective(u, q)
}
