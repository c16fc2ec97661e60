//! Maximum-likelihood straight-line fits to binned Poisson counts.
//!
//! The model density is `lambda * (1 + a * (x - x_a))`. The estimate of `a`
//! is the root of a one-dimensional function whose poles are known in
//! advance, so the fit needs no starting guess.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod gof;
pub mod likelihood;
pub mod simulate;
pub mod solver;
pub mod special;
pub mod uncertainty;

pub use dataset::{Bin, BinnedDataset, Gap, Geometry, Schema};
pub use error::{Branch, Error, Result};
pub use likelihood::ScargleParams;
pub use solver::{solve, ScargleFit, SolverConfig};
