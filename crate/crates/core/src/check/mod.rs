//! Self-test battery: adjoint identities, dense-oracle equivalence and
//! proximity-operator properties on small seeded instances.

pub mod dense;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cube::CubeDims;
use crate::error::Result;
use crate::operators::{
    dot, norm2, Blur, BlurSpec, LinearOperator, SpatialDiff, SpectralDiff, SpectralResponse,
};
use crate::prox::{
    project_l2_ball, prox_box, prox_conjugate, prox_group_l12, prox_l1, GroupLayout,
};
use crate::solver::{
    pds_solve, Bounds, FusionProblem, HsstvNorm, ProblemParams, SolverConfig, SolverState,
};
use dense::{DenseMatrix, DenseProblem};

/// Relative tolerance of the adjoint identity.
pub const ADJOINT_TOL: f64 = 1e-8;
/// Absolute tolerance of fast-versus-dense comparisons.
pub const DENSE_TOL: f64 = 1e-10;
/// Absolute tolerance of the Moreau identity.
pub const MOREAU_TOL: f64 = 1e-12;

/// `|<A x, y> - <x, A^T y>| / (||x|| ||y||)` maximized over `trials` random pairs.
pub fn adjoint_mismatch(op: &dyn LinearOperator, trials: usize, rng: &mut impl Rng) -> f64 {
    (0..trials)
        .map(|_| {
            let x = random_vec(rng, op.in_dim(), 1.0);
            let y = random_vec(rng, op.out_dim(), 1.0);
            let lhs = dot(&op.apply(&x), &y);
            let rhs = dot(&x, &op.adjoint(&y));
            let scale = norm2(&x) * norm2(&y);
            if scale == 0.0 {
                0.0
            } else {
                (lhs - rhs).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

/// Largest entry difference between `op` (and its adjoint) and `reference`.
pub fn dense_mismatch(op: &dyn LinearOperator, reference: &DenseMatrix) -> f64 {
    if (op.out_dim(), op.in_dim()) != (reference.rows(), reference.cols()) {
        return f64::INFINITY;
    }
    let fwd = DenseMatrix::from_operator(op).max_abs_diff(reference);
    let adj = DenseMatrix::from_adjoint(op).max_abs_diff(&reference.transpose());
    fwd.max(adj)
}

pub fn random_vec(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| scale * rng.random_range(-1.0..1.0))
        .collect()
}

/// Wraps an operator and corrupts its adjoint. Used to confirm that the
/// battery detects a mismatched pair.
pub struct PerturbedAdjoint<O>(pub O);

impl<O: LinearOperator> LinearOperator for PerturbedAdjoint<O> {
    fn in_dim(&self) -> usize {
        self.0.in_dim()
    }
    fn out_dim(&self) -> usize {
        self.0.out_dim()
    }
    fn name(&self) -> &str {
        self.0.name()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        self.0.apply_into(x, out)
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.0.adjoint_into(y, out);
        let n = y.len();
        for (i, o) in out.iter_mut().enumerate() {
            *o += 1e-3 * y[(7 * i + 3) % n];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckReport {
    pub outcomes: Vec<CheckOutcome>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.outcomes.iter().filter(|o| !o.passed)
    }

    fn record(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.outcomes.push(CheckOutcome {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    fn bound(&mut self, name: impl Into<String>, value: f64, tol: f64) {
        self.record(name, value <= tol, format!("{value:.3e} (tol {tol:.0e})"));
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in &self.outcomes {
            let tag = if o.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag} {:<44} {}", o.name, o.detail)?;
        }
        let failed = self.failures().count();
        write!(f, "{} checks, {failed} failed", self.outcomes.len())
    }
}

#[derive(Debug, Clone, Default)]
pub struct CheckOptions {
    pub seed: u64,
    /// Name of an operator (`D`, `D_b`, `A_omega`, `B`, `S`, `R`, `M_u`, `M`,
    /// `L`) whose adjoint is deliberately corrupted.
    pub perturb_adjoint: Option<String>,
}

/// A small fusion instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub label: &'static str,
    pub dims: CubeDims,
    pub ratio: usize,
    pub blur: BlurSpec,
    pub response: SpectralResponse,
    pub guide_range: (usize, usize),
    pub omega: f64,
    pub norm: HsstvNorm,
}

impl Instance {
    pub fn params(&self) -> ProblemParams {
        ProblemParams {
            dims: self.dims,
            ratio: self.ratio,
            blur: self.blur.clone(),
            response: self.response.clone(),
            guide_range: self.guide_range,
            omega: self.omega,
            norm: self.norm,
            lambda: 0.04,
            rho: 1.0,
            epsilon: 0.3,
            eta: 0.1,
            u_bounds: Bounds::default(),
            q_bounds: Bounds::default(),
        }
    }

    pub fn problem(&self) -> Result<FusionProblem> {
        FusionProblem::new(self.params())
    }
}

/// Instances up to 8x8x4 covering PAN and MS guides, both norms, Gaussian and
/// identity blur.
pub fn adjoint_instances() -> Result<Vec<Instance>> {
    let d = |nv, nh, b| CubeDims::new(nv, nh, b);
    Ok(vec![
        Instance {
            label: "8x8x4 pan r=2",
            dims: d(8, 8, 4)?,
            ratio: 2,
            blur: BlurSpec::for_ratio(2),
            response: SpectralResponse::pan_average(4, 1, 2)?,
            guide_range: (1, 2),
            omega: 0.05,
            norm: HsstvNorm::L12,
        },
        Instance {
            label: "8x8x4 ms r=4",
            dims: d(8, 8, 4)?,
            ratio: 4,
            blur: BlurSpec::Gaussian {
                radius: 3,
                sigma: 1.5,
            },
            response: SpectralResponse::uniform_windows(4, 2)?,
            guide_range: (1, 4),
            omega: 0.02,
            norm: HsstvNorm::L1,
        },
        Instance {
            label: "6x4x3 pan r=2",
            dims: d(6, 4, 3)?,
            ratio: 2,
            blur: BlurSpec::Gaussian {
                radius: 1,
                sigma: 0.8,
            },
            response: SpectralResponse::new(vec![vec![0.2, 0.5, 0.3]])?,
            guide_range: (1, 3),
            omega: 0.1,
            norm: HsstvNorm::L12,
        },
        Instance {
            label: "4x4x3 pan r=1",
            dims: d(4, 4, 3)?,
            ratio: 1,
            blur: BlurSpec::Identity,
            response: SpectralResponse::pan_average(3, 1, 2)?,
            guide_range: (1, 2),
            omega: 0.01,
            norm: HsstvNorm::L1,
        },
    ])
}

/// The 4x4x3, 1-band-guide instances used for dense comparisons.
pub fn dense_instances() -> Result<Vec<Instance>> {
    let dims = CubeDims::new(4, 4, 3)?;
    let response = SpectralResponse::new(vec![vec![0.5, 0.3, 0.2]])?;
    Ok(vec![
        Instance {
            label: "4x4x3 r=2 gaussian p=2",
            dims,
            ratio: 2,
            blur: BlurSpec::Gaussian {
                radius: 1,
                sigma: 0.5,
            },
            response: response.clone(),
            guide_range: (1, 2),
            omega: 0.05,
            norm: HsstvNorm::L12,
        },
        Instance {
            label: "4x4x3 r=1 identity p=1",
            dims,
            ratio: 1,
            blur: BlurSpec::Identity,
            response,
            guide_range: (1, 3),
            omega: 0.02,
            norm: HsstvNorm::L1,
        },
    ])
}

/// `(name, operator)` for every factor of `L` and `L` itself.
pub fn named_operators(problem: &FusionProblem) -> Result<Vec<Box<dyn LinearOperator + '_>>> {
    let p = problem.params();
    let l = problem.stacked_operator();
    Ok(vec![
        Box::new(SpatialDiff::new(p.dims)),
        Box::new(SpectralDiff::new(p.dims)),
        Box::new(l.hsstv()),
        Box::new(Blur::new(p.dims, &p.blur)?),
        Box::new(l.downsample()),
        Box::new(p.response.operator(p.dims.n_pixels())),
        Box::new(l.band_select()),
        Box::new(l.guide_lift()),
        Box::new(l),
    ])
}

/// Runs the whole battery.
pub fn run_self_checks(opts: &CheckOptions) -> Result<CheckReport> {
    let mut report = CheckReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let perturbed = |name: &str| opts.perturb_adjoint.as_deref() == Some(name);

    for inst in adjoint_instances()? {
        let problem = inst.problem()?;
        for op in named_operators(&problem)? {
            let name = op.name().to_string();
            let mismatch = if perturbed(&name) {
                adjoint_mismatch(&PerturbedAdjoint(&op), 5, &mut rng)
            } else {
                adjoint_mismatch(&op, 5, &mut rng)
            };
            report.bound(
                format!("adjoint {name} [{}]", inst.label),
                mismatch,
                ADJOINT_TOL,
            );
        }
    }

    for inst in dense_instances()? {
        let problem = inst.problem()?;
        let reference = DenseProblem::new(&problem)?;
        let refs = [
            &dense::spatial_diff(inst.dims),
            &dense::spectral_diff(inst.dims),
            &reference.a_omega,
            &reference.blur,
            &reference.down,
            &reference.response,
            &reference.select,
            &reference.lift,
            &reference.stacked,
        ];
        for (op, dense_op) in named_operators(&problem)?.iter().zip(refs) {
            let name = op.name().to_string();
            let diff = if perturbed(&name) {
                dense_mismatch(&PerturbedAdjoint(op), dense_op)
            } else {
                dense_mismatch(op, dense_op)
            };
            report.bound(format!("dense {name} [{}]", inst.label), diff, DENSE_TOL);
        }
        let diff = single_iteration_mismatch(&problem, &reference, &mut rng)?;
        report.bound(format!("dense iteration [{}]", inst.label), diff, DENSE_TOL);
    }

    prox_checks(&mut report, &mut rng)?;
    Ok(report)
}

/// Largest difference between one solver iteration and its dense reference,
/// started from a random state with nonzero duals.
pub fn single_iteration_mismatch(
    problem: &FusionProblem,
    reference: &DenseProblem,
    rng: &mut impl Rng,
) -> Result<f64> {
    let sizes = reference.blocks;
    let nb = problem.dims().len();
    let nq = problem.guide_dims().len();
    let v = random_vec(rng, problem.low_dims().len(), 1.0)
        .into_iter()
        .map(|x| 0.5 + 0.5 * x)
        .collect::<Vec<_>>();
    let g = random_vec(rng, nq, 0.5)
        .into_iter()
        .map(|x| 0.5 + x)
        .collect::<Vec<_>>();
    let state = SolverState {
        u: random_vec(rng, nb, 0.5).iter().map(|x| 0.5 + x).collect(),
        q: random_vec(rng, nq, 0.5).iter().map(|x| 0.5 + x).collect(),
        y1: random_vec(rng, sizes[0], 2.0),
        y2: random_vec(rng, sizes[1], 0.1),
        y3: random_vec(rng, sizes[2], 2.0),
        y4: random_vec(rng, sizes[3], 1.0),
        y5: random_vec(rng, sizes[4], 1.0),
        iteration: 0,
    };
    let config = SolverConfig {
        gamma1: 0.02,
        gamma2: 0.5,
        max_iters: 1,
        ..SolverConfig::default()
    };
    let fast = pds_solve(problem, &v, &g, &config, Some(state.clone()))?.state;
    let slow = dense::pds_step(
        problem,
        reference,
        &state,
        &v,
        &g,
        config.gamma1,
        config.gamma2,
    );
    let pairs = [
        (&fast.u, &slow.u),
        (&fast.q, &slow.q),
        (&fast.y1, &slow.y1),
        (&fast.y2, &slow.y2),
        (&fast.y3, &slow.y3),
        (&fast.y4, &slow.y4),
        (&fast.y5, &slow.y5),
    ];
    Ok(pairs
        .iter()
        .map(|(a, b)| max_abs_diff(a, b))
        .fold(0.0, f64::max))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Closed-form conjugate proximity steps, derived independently of the
/// Moreau route: `prox_{f* / gamma}(w)` for each `f`.
pub mod conjugate {
    use crate::prox::GroupLayout;

    /// `f = ||.||_1`: clamp to `[-1, 1]`.
    pub fn l1(w: &[f64]) -> Vec<f64> {
        w.iter().map(|a| a.clamp(-1.0, 1.0)).collect()
    }

    /// `f = ||.||_{1,2}`: project every group onto the unit ball.
    pub fn group_l12(w: &[f64], layout: &GroupLayout) -> Vec<f64> {
        let mut out = w.to_vec();
        for (g, norm) in layout.group_norms(w).enumerate() {
            if norm > 1.0 {
                for j in 0..layout.group_size {
                    out[g + j * layout.stride] /= norm;
                }
            }
        }
        out
    }

    /// `f` = indicator of the ball `B(c, r)`: `f*(z) = <c, z> + r ||z||`.
    pub fn ball(w: &[f64], center: &[f64], radius: f64, gamma: f64) -> Vec<f64> {
        let shifted: Vec<f64> = w.iter().zip(center).map(|(a, c)| a - c / gamma).collect();
        let norm = shifted.iter().map(|a| a * a).sum::<f64>().sqrt();
        let t = radius / gamma;
        let s = if norm > t { 1.0 - t / norm } else { 0.0 };
        shifted.iter().map(|a| s * a).collect()
    }

    /// `f` = indicator of `[lo, hi]^n`: `f*(z) = sum max(lo z_i, hi z_i)`.
    pub fn boxed(w: &[f64], lo: f64, hi: f64, gamma: f64) -> Vec<f64> {
        w.iter()
            .map(|&a| {
                if a > hi / gamma {
                    a - hi / gamma
                } else if a < lo / gamma {
                    a - lo / gamma
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Largest `|x - prox_{gamma f}(x) - gamma prox_{f*/gamma}(x / gamma)|`.
fn moreau_residual(x: &[f64], prox: &[f64], conj: &[f64], gamma: f64) -> f64 {
    x.iter()
        .zip(prox)
        .zip(conj)
        .map(|((a, p), c)| (a - p - gamma * c).abs())
        .fold(0.0, f64::max)
}

fn prox_checks(report: &mut CheckReport, rng: &mut impl Rng) -> Result<()> {
    let n = 24;
    let layout = GroupLayout::blocks(6, 4)?;
    let (lo, hi) = (0.0, 1.0);

    let mut moreau = [0.0f64; 4];
    let mut via_lib = [0.0f64; 4];
    for _ in 0..200 {
        let x = random_vec(rng, n, 3.0);
        let center = random_vec(rng, n, 1.0);
        let gamma = rng.random_range(0.05..2.0);
        let radius = rng.random_range(0.0..4.0);
        let xs: Vec<f64> = x.iter().map(|a| a / gamma).collect();

        let cases = [
            (prox_l1(&x, gamma)?, conjugate::l1(&xs)),
            (
                prox_group_l12(&x, &layout, gamma)?,
                conjugate::group_l12(&xs, &layout),
            ),
            (
                project_l2_ball(&x, &center, radius)?,
                conjugate::ball(&xs, &center, radius, gamma),
            ),
            (
                prox_box(&x, lo, hi, gamma)?,
                conjugate::boxed(&xs, lo, hi, gamma),
            ),
        ];
        for (i, (p, c)) in cases.iter().enumerate() {
            moreau[i] = moreau[i].max(moreau_residual(&x, p, c, gamma));
        }

        // the library conjugate step against the closed form
        let lib = [
            prox_conjugate(prox_l1, &x, gamma)?,
            prox_conjugate(|w, t| prox_group_l12(w, &layout, t), &x, gamma)?,
            prox_conjugate(|w, _| project_l2_ball(w, &center, radius), &x, gamma)?,
            prox_conjugate(|w, t| prox_box(w, lo, hi, t), &x, gamma)?,
        ];
        let closed = [
            conjugate::l1(&x),
            conjugate::group_l12(&x, &layout),
            conjugate::ball(&x, &center, radius, 1.0 / gamma),
            conjugate::boxed(&x, lo, hi, 1.0 / gamma),
        ];
        for i in 0..4 {
            via_lib[i] = via_lib[i].max(max_abs_diff(&lib[i], &closed[i]));
        }
    }
    let names = ["l1", "group l1,2", "l2 ball", "box"];
    for i in 0..4 {
        report.bound(
            format!("moreau identity {}", names[i]),
            moreau[i],
            MOREAU_TOL,
        );
        report.bound(
            format!("conjugate prox {}", names[i]),
            via_lib[i],
            MOREAU_TOL,
        );
    }

    let mut ratio = [0.0f64; 4];
    for _ in 0..1000 {
        let x = random_vec(rng, n, 3.0);
        let y = random_vec(rng, n, 3.0);
        let center = random_vec(rng, n, 1.0);
        let gamma = rng.random_range(0.05..2.0);
        let radius = rng.random_range(0.0..4.0);
        let pairs = [
            (prox_l1(&x, gamma)?, prox_l1(&y, gamma)?),
            (
                prox_group_l12(&x, &layout, gamma)?,
                prox_group_l12(&y, &layout, gamma)?,
            ),
            (
                project_l2_ball(&x, &center, radius)?,
                project_l2_ball(&y, &center, radius)?,
            ),
            (prox_box(&x, lo, hi, gamma)?, prox_box(&y, lo, hi, gamma)?),
        ];
        let dxy = crate::prox::distance(&x, &y);
        for (i, (px, py)) in pairs.iter().enumerate() {
            ratio[i] = ratio[i].max(crate::prox::distance(px, py) / dxy);
        }
    }
    for i in 0..4 {
        report.record(
            format!("nonexpansive {}", names[i]),
            ratio[i] <= 1.0 + 1e-12,
            format!("max ratio {:.6} over 1000 pairs", ratio[i]),
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_passes() {
        let report = run_self_checks(&CheckOptions::default()).unwrap();
        assert!(report.all_passed(), "{report}");
    }

    #[test]
    fn perturbed_adjoint_is_named() {
        let opts = CheckOptions {
            seed: 1,
            perturb_adjoint: Some("M".into()),
        };
        let report = run_self_checks(&opts).unwrap();
        assert!(!report.all_passed());
        assert!(report.failures().all(|f| f.name.contains(" M [")));
        assert!(report.failures().any(|f| f.name.starts_with("adjoint M")));
    }
}
