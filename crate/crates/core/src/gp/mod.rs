//! Exact Gaussian process regression on dense matrices.
//!
//! Inputs are `nalgebra` matrices with one point per row. The prior mean is
//! zero on the (optionally standardized) target scale.

mod hyper;
mod kernel;
mod model;

pub use hyper::{optimize_hyperparams, HyperBudget, HyperFit};
pub use kernel::{kernel_eval, kernel_matrix, KernelFamily, KernelSpec};
pub use model::{neg_log_marginal_likelihood, standardize, GpHyperparams, GpModel, PosteriorSummary, NOISE_FLOOR};
