use nalgebra::{Cholesky, DMatrix};

use crate::{Error, Result};

const JITTER_START: f64 = 1e-8;
const JITTER_MAX: f64 = 1e-2;

/// Lower Cholesky factor of `a`, retrying with diagonal jitter
/// `1e-8 * mean(diag)`, escalated by 10x up to `1e-2 * mean(diag)`.
///
/// The first attempt adds nothing. Returns the factor together with the
/// absolute jitter that was added.
pub(crate) fn cholesky_with_jitter(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((DMatrix::zeros(0, 0), 0.0));
    }
    if let Some(chol) = Cholesky::new(a.clone()) {
        return Ok((chol.unpack(), 0.0));
    }
    let mean_diag = (a.diagonal().sum() / n as f64).abs().max(f64::MIN_POSITIVE);
    let mut rel = JITTER_START;
    let mut last = 0.0;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * mean_diag;
        last = jitter;
        let mut shifted = a.clone();
        for i in 0..n {
            shifted[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(shifted) {
            return Ok((chol.unpack(), jitter));
        }
        rel *= 10.0;
    }
    Err(Error::Factorization { jitter: last })
}
