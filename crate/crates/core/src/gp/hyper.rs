//! Derivative-free marginal-likelihood maximization.
//!
//! Multi-start coordinate descent over log-parameters inside fixed boxes.
//! The first start is the caller's initial guess; the rest are drawn
//! uniformly inside the boxes.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::kernel::{KernelFamily, KernelSpec};
use super::model::{nll_from_factor, GpHyperparams, NOISE_FLOOR};
use crate::linalg::cholesky_with_jitter;
use crate::{Error, Result};

// Search bounds in natural-log space, written as powers of ten.
const LN10: f64 = std::f64::consts::LN_10;
const LOG_LENGTHSCALE: (f64, f64) = (-3.0 * LN10, 3.0 * LN10);
const LOG_OUTPUTSCALE: (f64, f64) = (-4.0 * LN10, 4.0 * LN10);
const LOG_NOISE: (f64, f64) = (-6.0 * LN10, LN10);
const LOG_BIAS: (f64, f64) = (-6.0 * LN10, 4.0 * LN10);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HyperBudget {
    /// Number of starting points, the initial guess included. Zero disables the search.
    pub restarts: usize,
    /// Maximum coordinate sweeps per start.
    pub max_sweeps: usize,
}

impl Default for HyperBudget {
    fn default() -> Self {
        HyperBudget {
            restarts: 8,
            max_sweeps: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperFit {
    pub hyper: GpHyperparams,
    pub nll: f64,
    /// Set when no candidate (the initial guess included) could be factorized.
    pub failed: bool,
}

fn bounds(family: KernelFamily) -> [(f64, f64); 3] {
    match family {
        KernelFamily::Rbf => [LOG_OUTPUTSCALE, LOG_LENGTHSCALE, LOG_NOISE],
        KernelFamily::Linear => [LOG_OUTPUTSCALE, LOG_BIAS, LOG_NOISE],
    }
}

fn decode(family: KernelFamily, p: &[f64]) -> GpHyperparams {
    GpHyperparams {
        kernel: KernelSpec::from_log(family, &p[..2]),
        noise_variance: p[2].exp().max(NOISE_FLOOR),
    }
}

fn objective(x: &DMatrix<f64>, y: &DVector<f64>, h: &GpHyperparams) -> f64 {
    let mut k = h.kernel.gram(x);
    for i in 0..k.nrows() {
        k[(i, i)] += h.noise_variance;
    }
    match cholesky_with_jitter(&k) {
        Ok((l, _)) => {
            let v = nll_from_factor(&l, y);
            if v.is_finite() {
                v
            } else {
                f64::INFINITY
            }
        }
        Err(_) => f64::INFINITY,
    }
}

/// Searches for hyperparameters with lower negative log marginal likelihood
/// than `init`. The result never scores worse than `init`.
pub fn optimize_hyperparams<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    init: &GpHyperparams,
    budget: HyperBudget,
    rng: &mut R,
) -> Result<HyperFit> {
    init.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if y.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "hyperparameter search needs at least 2 observations, got {}",
            y.len()
        )));
    }
    let init_nll = objective(x, y, init);
    let mut best = HyperFit {
        hyper: *init,
        nll: init_nll,
        failed: !init_nll.is_finite(),
    };
    if budget.restarts == 0 {
        return Ok(best);
    }

    let family = init.kernel.family();
    let bx = bounds(family);
    let mut start: Vec<f64> = init.kernel.to_log();
    start.push(init.noise_variance.ln());
    for (v, (lo, hi)) in start.iter_mut().zip(bx) {
        *v = v.clamp(lo, hi);
    }

    for restart in 0..budget.restarts {
        let p0 = if restart == 0 {
            start.clone()
        } else {
            bx.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect()
        };
        let (p, f) = coordinate_descent(x, y, family, p0, &bx, budget.max_sweeps);
        if f < best.nll {
            best = HyperFit {
                hyper: decode(family, &p),
                nll: f,
                failed: false,
            };
        }
    }
    if best.failed {
        log::warn!("hyperparameter search: no candidate could be factorized; keeping initial values");
    }
    Ok(best)
}

fn coordinate_descent(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    family: KernelFamily,
    mut p: Vec<f64>,
    bx: &[(f64, f64); 3],
    max_sweeps: usize,
) -> (Vec<f64>, f64) {
    let mut f = objective(x, y, &decode(family, &p));
    let mut step = 1.0;
    for _ in 0..max_sweeps {
        let mut improved = false;
        for i in 0..p.len() {
            for dir in [1.0, -1.0] {
                let mut q = p.clone();
                q[i] = (q[i] + dir * step).clamp(bx[i].0, bx[i].1);
                if q[i] == p[i] {
                    continue;
                }
                let fq = objective(x, y, &decode(family, &q));
                if fq < f {
                    p = q;
                    f = fq;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-3 {
                break;
            }
        }
    }
    (p, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::model::neg_log_marginal_likelihood;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn init() -> GpHyperparams {
        GpHyperparams::new(KernelSpec::rbf(1.0, 1.0).unwrap(), 0.1).unwrap()
    }

    fn toy_data(seed: u64, n: usize) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: DMatrix<f64> = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-2.0..2.0));
        let y = DVector::from_fn(n, |i, _| (3.0 * x[(i, 0)]).sin());
        (x, y)
    }

    #[test]
    fn zero_restarts_returns_init() {
        let (x, y) = toy_data(1, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let fit = optimize_hyperparams(
            &x,
            &y,
            &init(),
            HyperBudget {
                restarts: 0,
                max_sweeps: 10,
            },
            &mut rng,
        )
        .unwrap();
        assert_eq!(fit.hyper, init());
    }

    #[test]
    fn never_worse_than_init_and_deterministic() {
        let (x, y) = toy_data(2, 15);
        let base = neg_log_marginal_likelihood(&x, &y, &init()).unwrap();
        let a = optimize_hyperparams(
            &x,
            &y,
            &init(),
            HyperBudget::default(),
            &mut ChaCha8Rng::seed_from_u64(9),
        )
        .unwrap();
        let b = optimize_hyperparams(
            &x,
            &y,
            &init(),
            HyperBudget::default(),
            &mut ChaCha8Rng::seed_from_u64(9),
        )
        .unwrap();
        assert_eq!(a, b);
        assert!(a.nll <= base);
        let check = neg_log_marginal_likelihood(&x, &y, &a.hyper).unwrap();
        assert!((check - a.nll).abs() < 1e-9 * check.abs().max(1.0));
    }

    #[test]
    fn linear_kernel_with_zero_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = DMatrix::from_fn(12, 2, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(12, |i, _| 2.0 * x[(i, 0)] - x[(i, 1)]);
        let h = GpHyperparams::new(KernelSpec::linear(1.0, 0.0).unwrap(), 0.5).unwrap();
        let base = neg_log_marginal_likelihood(&x, &y, &h).unwrap();
        let fit = optimize_hyperparams(&x, &y, &h, HyperBudget::default(), &mut rng).unwrap();
        assert!(fit.nll <= base);
        assert!(fit.hyper.noise_variance < 0.5);
    }

    #[test]
    fn needs_two_points() {
        let x = DMatrix::from_element(1, 1, 0.0);
        let y = DVector::from_element(1, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(optimize_hyperparams(&x, &y, &init(), HyperBudget::default(), &mut rng).is_err());
    }
}
