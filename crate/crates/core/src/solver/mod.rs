//! Primal-dual splitting for the HSSTV-regularized fusion program.

mod pds;
mod problem;
mod trace;

pub use pds::{
    check_step_condition, pds_solve, select_step_sizes, SolveOutput, SolveStatus, SolverConfig,
    SolverState, DEFAULT_FEAS_TOL, DEFAULT_MAX_ITERS, DEFAULT_REL_TOL, DEFAULT_TRACE_EVERY,
    MS_FUSION_STEPS, PANSHARPENING_STEPS,
};
pub use problem::{hsstv_value, objective_value, Bounds, FusionProblem, HsstvNorm, ProblemParams};
pub use trace::{ConvergenceTrace, TraceRecord, TRACE_CSV_HEADER};
