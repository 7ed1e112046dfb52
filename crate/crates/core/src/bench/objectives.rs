use crate::{Error, Result};

/// Dimension of the additive exponential benchmark.
pub const HDBO_DIM: usize = 200;

/// `sin(64 |x|^4) - (x - 0.2)^2` on `[-1, 1]`: a smooth bump in the middle
/// flanked by high-frequency oscillations.
pub fn toy1d_eval(x: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::InvalidInput(format!("toy1d input {x} outside [-1, 1]")));
    }
    Ok((64.0 * x.abs().powi(4)).sin() - (x - 0.2).powi(2))
}

/// `sum_i exp(x_i)` over a 200-dimensional input.
pub fn hdbo_eval(x: &[f64]) -> Result<f64> {
    if x.len() != HDBO_DIM {
        return Err(Error::DimensionMismatch {
            expected: HDBO_DIM,
            got: x.len(),
        });
    }
    Ok(x.iter().map(|v| v.exp()).sum())
}
