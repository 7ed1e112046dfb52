//! Candidate-pool Bayesian optimization with adaptive superlevel-set filtering.
//!
//! A global Gaussian process ranks the whole candidate pool and keeps only the
//! candidates whose upper confidence bound reaches the best lower confidence
//! bound (the region of interest). A second GP is fit on the observations
//! inside that region, and candidates are scored by the width of the
//! intersection of both models' confidence intervals.
//!
//! * [`gp`]: exact GP regression (kernels, Cholesky posterior, marginal
//!   likelihood, hyperparameter search, joint sampling).
//! * [`ballet`]: confidence bounds, region-of-interest filtering, interval
//!   intersection, acquisition functions and the optimization loop state.
//! * [`bench`]: synthetic objectives, candidate pools, the seeded trial
//!   runner and trace aggregation.

pub mod ballet;
pub mod bench;
mod error;
pub mod gp;
pub(crate) mod linalg;

pub use error::{Error, PoolCsvError, Result};
