use super::problem::{FusionProblem, HsstvNorm};
use super::trace::{ConvergenceTrace, TraceRecord};
use crate::cube::{GuideImage, HsCube};
use crate::error::{Error, Result};
use crate::operators::{
    norm2, operator_norm_estimate, LinearOperator, DEFAULT_NORM_ITERS, NORM_SAFETY_FACTOR,
};
use crate::prox::{
    project_l2_ball_inplace, prox_box_inplace, prox_conjugate_inplace, prox_group_l12_inplace,
    prox_l1_inplace,
};

/// Paper-table step pair for PAN-guided runs.
pub const PANSHARPENING_STEPS: (f64, f64) = (0.005, 0.1818);
/// Paper-table step pair for MS-guided runs.
pub const MS_FUSION_STEPS: (f64, f64) = (0.01, 0.5);

pub const DEFAULT_MAX_ITERS: usize = 10_000;
pub const DEFAULT_REL_TOL: f64 = 1e-4;
pub const DEFAULT_TRACE_EVERY: usize = 10;
pub const DEFAULT_FEAS_TOL: f64 = 1e-3;

/// Iterates are declared divergent once `||u||` exceeds this multiple of `sqrt(NB)`.
const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub gamma1: f64,
    pub gamma2: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub trace_every: usize,
    /// Convergence also requires `||S B u - v|| <= (1 + feas_tol) ε` and
    /// `||q - g|| <= (1 + feas_tol) η`; zero radii are exempt.
    pub feas_tol: f64,
    /// Power iterations used to verify the step-size condition.
    pub norm_iters: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma1: PANSHARPENING_STEPS.0,
            gamma2: PANSHARPENING_STEPS.1,
            max_iters: DEFAULT_MAX_ITERS,
            rel_tol: DEFAULT_REL_TOL,
            trace_every: DEFAULT_TRACE_EVERY,
            feas_tol: DEFAULT_FEAS_TOL,
            norm_iters: DEFAULT_NORM_ITERS,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("rel_tol", self.rel_tol),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.feas_tol >= 0.0) {
            return Err(Error::param(format!(
                "feas_tol must be >= 0, got {}",
                self.feas_tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters must be >= 1"));
        }
        if self.trace_every == 0 {
            return Err(Error::param("trace_every must be >= 1"));
        }
        Ok(())
    }
}

/// Picks `gamma2` so that `gamma1 * gamma2 * (1.01 * ||L||)^2 = 1`.
pub fn select_step_sizes(norm_estimate: f64, gamma1: f64) -> Result<(f64, f64)> {
    if !(norm_estimate > 0.0) || !norm_estimate.is_finite() {
        return Err(Error::param(format!(
            "operator norm estimate must be positive, got {norm_estimate}"
        )));
    }
    if !(gamma1 > 0.0) || !gamma1.is_finite() {
        return Err(Error::param(format!(
            "gamma1 must be positive, got {gamma1}"
        )));
    }
    let inflated = NORM_SAFETY_FACTOR * norm_estimate;
    Ok((gamma1, 1.0 / (gamma1 * inflated * inflated)))
}

/// Primal and dual iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub u: Vec<f64>,
    pub q: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub y3: Vec<f64>,
    pub y4: Vec<f64>,
    pub y5: Vec<f64>,
    pub iteration: usize,
}

impl SolverState {
    /// `u = B^T S^T v`, `q = g`, all duals zero.
    pub fn initial(problem: &FusionProblem, v: &[f64], g: &[f64]) -> Result<Self> {
        check_observations(problem, v, g)?;
        let l = problem.stacked_operator();
        let sizes = l.layout().sizes;
        Ok(Self {
            u: l.observe_adjoint(v),
            q: g.to_vec(),
            y1: vec![0.0; sizes[0]],
            y2: vec![0.0; sizes[1]],
            y3: vec![0.0; sizes[2]],
            y4: vec![0.0; sizes[3]],
            y5: vec![0.0; sizes[4]],
            iteration: 0,
        })
    }

    fn check(&self, problem: &FusionProblem) -> Result<()> {
        problem.check_primal(&self.u, &self.q)?;
        let sizes = problem.stacked_operator().layout().sizes;
        for (i, (y, want)) in [&self.y1, &self.y2, &self.y3, &self.y4, &self.y5]
            .iter()
            .zip(sizes)
            .enumerate()
        {
            if y.len() != want {
                return Err(Error::dim(format!(
                    "y{} has {} entries, expected {want}",
                    i + 1,
                    y.len()
                )));
            }
        }
        let all = [
            &self.u, &self.q, &self.y1, &self.y2, &self.y3, &self.y4, &self.y5,
        ];
        if all.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite("initial solver state".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIters,
    Diverged,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIters => "max_iters",
            SolveStatus::Diverged => "diverged",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub u: HsCube,
    pub q: GuideImage,
    pub trace: ConvergenceTrace,
    pub status: SolveStatus,
    pub iterations: usize,
    /// Final iterates, usable as a warm start.
    pub state: SolverState,
}

fn check_observations(problem: &FusionProblem, v: &[f64], g: &[f64]) -> Result<()> {
    let (lo, gd) = (problem.low_dims(), problem.guide_dims());
    if v.len() != lo.len() {
        return Err(Error::dim(format!(
            "v has {} samples, expected {} ({lo})",
            v.len(),
            lo.len()
        )));
    }
    if g.len() != gd.len() {
        return Err(Error::dim(format!(
            "g has {} samples, expected {} ({gd})",
            g.len(),
            gd.len()
        )));
    }
    if v.iter().chain(g).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("observations".into()));
    }
    Ok(())
}

/// Verifies `gamma1 * gamma2 * ||L||^2 <= 1` with a power-iteration estimate of `||L||`.
pub fn check_step_condition(problem: &FusionProblem, config: &SolverConfig) -> Result<f64> {
    let norm = operator_norm_estimate(
        problem.stacked_operator(),
        config.norm_iters.max(1),
        config.seed,
    )?;
    let product = config.gamma1 * config.gamma2 * norm * norm;
    if product > 1.0 {
        return Err(Error::param(format!(
            "step sizes violate gamma1*gamma2*||L||^2 <= 1: {} * {} * {norm:.6}^2 = {product:.6}",
            config.gamma1, config.gamma2
        )));
    }
    Ok(norm)
}

/// Runs the primal-dual splitting iteration for `problem` with observations
/// `v` (low-resolution cube, flat) and `g` (guide, flat).
///
/// Each iteration performs a projected primal step on `(u, q)` along
/// `-gamma1 L^T y`, then a dual step on `y + gamma2 L(2 x_new - x)` through the
/// conjugate proximity operators of the five terms. Stops when
/// `||u_n - u_{n+1}|| / ||u_{n+1}|| < rel_tol` or after `max_iters` iterations.
/// The stopping test is skipped on iterations that start from all-zero duals,
/// and a small relative change only counts once both balls are met to
/// within `feas_tol`.
pub fn pds_solve(
    problem: &FusionProblem,
    v: &[f64],
    g: &[f64],
    config: &SolverConfig,
    init: Option<SolverState>,
) -> Result<SolveOutput> {
    config.validate()?;
    check_observations(problem, v, g)?;
    check_step_condition(problem, config)?;
    let state = match init {
        Some(s) => {
            s.check(problem)?;
            s
        }
        None => SolverState::initial(problem, v, g)?,
    };

    let params = problem.params();
    let l = problem.stacked_operator();
    let layout = l.layout();
    let nb = problem.dims().len();
    let (gamma1, gamma2) = (config.gamma1, config.gamma2);
    let divergence_limit = DIVERGENCE_FACTOR * (nb as f64).sqrt();

    let mut x: Vec<f64> = state.u.iter().chain(&state.q).copied().collect();
    let mut y: Vec<f64> = [&state.y1, &state.y2, &state.y3, &state.y4, &state.y5]
        .into_iter()
        .flatten()
        .copied()
        .collect();
    let mut x_new = vec![0.0; x.len()];
    let mut lty = vec![0.0; x.len()];
    let mut lx = vec![0.0; y.len()];
    let mut scratch = vec![0.0; y.len()];

    let mut trace = ConvergenceTrace::default();
    let mut status = SolveStatus::MaxIters;
    let mut done = 0;
    let start_iter = state.iteration;

    for n in 0..config.max_iters {
        let iter = start_iter + n + 1;

        // with all duals zero the primal step is a bare box projection, so its
        // relative change says nothing about stationarity
        let duals_active = y.iter().any(|&d| d != 0.0);

        // primal step
        l.adjoint_into(&y, &mut lty);
        for ((xn, xo), d) in x_new.iter_mut().zip(&x).zip(&lty) {
            *xn = xo - gamma1 * d;
        }
        let u_norm_raw = norm2(&x_new[..nb]);
        if !x_new.iter().sum::<f64>().is_finite() || u_norm_raw > divergence_limit {
            return Err(Error::Diverged {
                iteration: iter,
                trace: Box::new(trace),
            });
        }
        let (u_new, q_new) = x_new.split_at_mut(nb);
        prox_box_inplace(u_new, params.u_bounds.lo, params.u_bounds.hi, gamma1)?;
        prox_box_inplace(q_new, params.q_bounds.lo, params.q_bounds.hi, gamma1)?;

        let diff: f64 = x[..nb]
            .iter()
            .zip(u_new.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let u_norm = norm2(u_new);
        let rel_change = if u_norm > 0.0 {
            diff / u_norm
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };

        // dual step on the over-relaxed primal 2 x_new - x
        for (xo, xn) in x.iter_mut().zip(&x_new) {
            *xo = 2.0 * xn - *xo;
        }
        l.apply_into(&x, &mut lx);
        for (yi, li) in y.iter_mut().zip(&lx) {
            *yi += gamma2 * li;
        }
        if !y.iter().sum::<f64>().is_finite() {
            return Err(Error::Diverged {
                iteration: iter,
                trace: Box::new(trace),
            });
        }
        dual_prox(problem, v, g, gamma2, &mut y, &mut scratch)?;
        std::mem::swap(&mut x, &mut x_new);
        done = n + 1;

        let converged = duals_active && rel_change < config.rel_tol && {
            let (u, q) = x.split_at(nb);
            feasible(problem.v_gap(u, v), params.epsilon, config.feas_tol)
                && feasible(problem.g_gap(q, g), params.eta, config.feas_tol)
        };
        let last = converged || n + 1 == config.max_iters;
        if iter % config.trace_every == 0 || last {
            let (u, q) = x.split_at(nb);
            trace.records.push(TraceRecord {
                iter,
                objective: problem.objective(u, q)?,
                rel_change,
                v_gap: problem.v_gap(u, v),
                g_gap: problem.g_gap(q, g),
            });
        }
        if converged {
            status = SolveStatus::Converged;
            break;
        }
    }

    let (u, q) = x.split_at(nb);
    let [y1, y2, y3, y4, y5] = layout.split(&y).map(|b| b.to_vec());
    let state = SolverState {
        u: u.to_vec(),
        q: q.to_vec(),
        y1,
        y2,
        y3,
        y4,
        y5,
        iteration: start_iter + done,
    };
    Ok(SolveOutput {
        u: HsCube::from_dims(state.u.clone(), problem.dims())?,
        q: HsCube::from_dims(state.q.clone(), problem.guide_dims())?.into(),
        trace,
        status,
        iterations: done,
        state,
    })
}

fn feasible(gap: f64, radius: f64, tol: f64) -> bool {
    radius == 0.0 || gap <= tol * radius
}

/// Replaces `y` (holding `y + gamma2 L x_bar`) by its conjugate proximity step.
fn dual_prox(
    problem: &FusionProblem,
    v: &[f64],
    g: &[f64],
    gamma2: f64,
    y: &mut [f64],
    scratch: &mut [f64],
) -> Result<()> {
    let params = problem.params();
    let layout = problem.stacked_operator().layout();
    let [y1, y2, y3, y4, y5] = layout.split_mut(y);
    let [s1, s2, s3, s4, s5] = layout.split_mut(scratch);

    match params.norm {
        HsstvNorm::L1 => prox_conjugate_inplace(prox_l1_inplace, y1, gamma2, s1)?,
        HsstvNorm::L12 => {
            let groups = problem.hsstv_groups();
            prox_conjugate_inplace(|w, t| prox_group_l12_inplace(w, groups, t), y1, gamma2, s1)?
        }
    }
    let (lambda, rho) = (params.lambda, params.rho);
    let edge = problem.edge_groups();
    prox_conjugate_inplace(
        |w, t| prox_group_l12_inplace(w, edge, lambda * t),
        y2,
        gamma2,
        s2,
    )?;
    let guide = problem.guide_groups();
    prox_conjugate_inplace(
        |w, t| prox_group_l12_inplace(w, guide, rho * t),
        y3,
        gamma2,
        s3,
    )?;
    prox_conjugate_inplace(
        |w, _| project_l2_ball_inplace(w, v, params.epsilon),
        y4,
        gamma2,
        s4,
    )?;
    prox_conjugate_inplace(
        |w, _| project_l2_ball_inplace(w, g, params.eta),
        y5,
        gamma2,
        s5,
    )?;
    Ok(())
}
