//! Hyperspectral image fusion by hybrid spatio-spectral total variation.
//!
//! Estimates a high-resolution hyperspectral cube `u` and a denoised guide
//! `q` from a blurred, decimated, noisy hyperspectral observation `v` and a
//! noisy PAN or MS guide `g`:
//!
//! ```text
//! v = S B u + n_v,     g = R u + n_g
//! ```
//!
//! The estimate solves a constrained convex program (see
//! [`solver::FusionProblem`]) with a primal-dual splitting method.
//! [`simulate`] produces `(v, g)` from a reference cube and [`metrics`]
//! scores the result against it.

// `!(x > 0.0)` also rejects NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod check;
pub mod cube;
pub mod error;
pub mod metrics;
pub mod operators;
pub mod prox;
pub mod simulate;
pub mod solver;

pub use cube::{flatten_index, rgb_composite, CubeDims, GuideImage, HsCube};
pub use error::{Error, Result};
