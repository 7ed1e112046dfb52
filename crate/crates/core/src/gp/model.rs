use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::kernel::KernelSpec;
use crate::linalg::cholesky_with_jitter;
use crate::{Error, Result};

/// Lowest admissible observation-noise variance.
pub const NOISE_FLOOR: f64 = 1e-6;

/// Kernel plus observation-noise variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpHyperparams {
    pub kernel: KernelSpec,
    pub noise_variance: f64,
}

impl GpHyperparams {
    pub fn new(kernel: KernelSpec, noise_variance: f64) -> Result<Self> {
        let h = GpHyperparams { kernel, noise_variance };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.noise_variance.is_finite() && self.noise_variance >= NOISE_FLOOR) {
            return Err(Error::InvalidInput(format!(
                "noise variance {} below floor {NOISE_FLOOR:e}",
                self.noise_variance
            )));
        }
        Ok(())
    }
}

/// Point-wise posterior mean and standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Z-scores `y`. Returns the scaled targets with the shift and scale used;
/// a constant vector keeps scale 1.
pub fn standardize(y: &DVector<f64>) -> (DVector<f64>, f64, f64) {
    let n = y.len();
    if n < 2 {
        return (y.clone(), 0.0, 1.0);
    }
    let mean = y.mean();
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    let scale = if sd > 1e-12 * mean.abs().max(1.0) { sd } else { 1.0 };
    (y.map(|v| (v - mean) / scale), mean, scale)
}

/// An exact GP conditioned on training data. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpModel {
    inputs: DMatrix<f64>,
    targets: DVector<f64>,
    hyper: GpHyperparams,
    shift: f64,
    scale: f64,
    // lower factor of K + (noise + jitter) I
    chol: DMatrix<f64>,
    // (K + noise I)^-1 y on the standardized scale
    alpha: DVector<f64>,
    jitter: f64,
}

impl GpModel {
    /// The prior over inputs of dimension `dim`.
    pub fn prior(dim: usize, hyper: GpHyperparams) -> Result<Self> {
        hyper.validate()?;
        Ok(GpModel {
            inputs: DMatrix::zeros(0, dim),
            targets: DVector::zeros(0),
            hyper,
            shift: 0.0,
            scale: 1.0,
            chol: DMatrix::zeros(0, 0),
            alpha: DVector::zeros(0),
            jitter: 0.0,
        })
    }

    /// Conditions the GP on `(x, y)`. With `standardize` set and at least two
    /// points, targets are z-scored internally and predictions are mapped back.
    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>, hyper: GpHyperparams, standardize_targets: bool) -> Result<Self> {
        hyper.validate()?;
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if x.nrows() == 0 {
            return GpModel::prior(x.ncols(), hyper);
        }
        let (ys, shift, scale) = if standardize_targets {
            standardize(y)
        } else {
            (y.clone(), 0.0, 1.0)
        };
        let mut k = hyper.kernel.gram(x);
        for i in 0..k.nrows() {
            k[(i, i)] += hyper.noise_variance;
        }
        let (chol, jitter) = cholesky_with_jitter(&k)?;
        let alpha = chol_solve(&chol, &ys);
        Ok(GpModel {
            inputs: x.clone(),
            targets: y.clone(),
            hyper,
            shift,
            scale,
            chol,
            alpha,
            jitter,
        })
    }

    pub fn n_train(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn hyperparams(&self) -> &GpHyperparams {
        &self.hyper
    }

    pub fn train_inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn train_targets(&self) -> &DVector<f64> {
        &self.targets
    }

    pub fn chol_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Target shift and scale applied before conditioning.
    pub fn standardization(&self) -> (f64, f64) {
        (self.shift, self.scale)
    }

    /// Diagonal jitter added on top of the noise variance during factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    fn check_dim(&self, xq: &DMatrix<f64>) -> Result<()> {
        if xq.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: xq.ncols(),
            });
        }
        Ok(())
    }

    /// Returns `(K_*^T alpha, L^-1 K_*)` for the query rows.
    fn project(&self, xq: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let kx = self.hyper.kernel.matrix(&self.inputs, xq)?;
        let mean = kx.tr_mul(&self.alpha);
        let v = self
            .chol
            .solve_lower_triangular(&kx)
            .expect("cholesky factor has a nonzero diagonal");
        Ok((mean, v))
    }

    pub fn posterior_mean_var(&self, xq: &DMatrix<f64>) -> Result<PosteriorSummary> {
        self.check_dim(xq)?;
        let m = xq.nrows();
        let prior_var = (0..m).map(|i| self.hyper.kernel.diag_row(xq, i));
        if self.n_train() == 0 {
            return Ok(PosteriorSummary {
                mean: vec![self.shift; m],
                std: prior_var.map(|v| v.max(0.0).sqrt() * self.scale).collect(),
            });
        }
        let (mean, v) = self.project(xq)?;
        let s2 = self.scale * self.scale;
        let std = prior_var
            .zip(v.column_iter())
            .map(|(kss, col)| ((kss - col.norm_squared()).max(0.0) * s2).sqrt())
            .collect();
        Ok(PosteriorSummary {
            mean: mean.iter().map(|mu| self.shift + self.scale * mu).collect(),
            std,
        })
    }

    /// Full posterior covariance between the query rows.
    pub fn posterior_cov(&self, xq: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(xq)?;
        let kss = self.hyper.kernel.gram(xq);
        let mut cov = if self.n_train() == 0 {
            kss
        } else {
            let (_, v) = self.project(xq)?;
            kss - v.tr_mul(&v)
        };
        let s2 = self.scale * self.scale;
        let m = cov.nrows();
        for i in 0..m {
            for j in 0..i {
                let avg = 0.5 * (cov[(i, j)] + cov[(j, i)]) * s2;
                cov[(i, j)] = avg;
                cov[(j, i)] = avg;
            }
            cov[(i, i)] = cov[(i, i)].max(0.0) * s2;
        }
        Ok(cov)
    }

    /// One joint draw from the posterior at the query rows.
    pub fn sample_posterior<R: Rng + ?Sized>(&self, xq: &DMatrix<f64>, rng: &mut R) -> Result<DVector<f64>> {
        if xq.nrows() == 0 {
            return Err(Error::InvalidInput(
                "sample_posterior needs at least one query point".into(),
            ));
        }
        let cov = self.posterior_cov(xq)?;
        let mean = DVector::from_vec(self.posterior_mean_var(xq)?.mean);
        let (l, _) = cholesky_with_jitter(&cov)?;
        let z = DVector::from_fn(xq.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
        Ok(mean + l * z)
    }
}

/// Solves `L L^T a = b` given the lower factor `L`.
pub(crate) fn chol_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let w = l
        .solve_lower_triangular(b)
        .expect("cholesky factor has a nonzero diagonal");
    l.tr_solve_lower_triangular(&w)
        .expect("cholesky factor has a nonzero diagonal")
}

/// Negative log marginal likelihood
/// `0.5 y^T (K + s^2 I)^-1 y + 0.5 log|K + s^2 I| + (n/2) log 2pi`.
pub fn neg_log_marginal_likelihood(x: &DMatrix<f64>, y: &DVector<f64>, hyper: &GpHyperparams) -> Result<f64> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::InvalidInput(
            "marginal likelihood needs at least one observation".into(),
        ));
    }
    let mut k = hyper.kernel.gram(x);
    for i in 0..k.nrows() {
        k[(i, i)] += hyper.noise_variance;
    }
    let (l, _) = cholesky_with_jitter(&k)?;
    Ok(nll_from_factor(&l, y))
}

pub(crate) fn nll_from_factor(l: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let w = l
        .solve_lower_triangular(y)
        .expect("cholesky factor has a nonzero diagonal");
    let log_det_half: f64 = l.diagonal().iter().map(|d| d.ln()).sum();
    0.5 * w.norm_squared() + log_det_half + 0.5 * y.len() as f64 * (2.0 * std::f64::consts::PI).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rbf(os: f64, l: f64, noise: f64) -> GpHyperparams {
        GpHyperparams::new(KernelSpec::rbf(os, l).unwrap(), noise).unwrap()
    }

    #[test]
    fn prior_model_returns_prior_moments() {
        let m = GpModel::prior(2, rbf(2.0, 1.0, 0.1)).unwrap();
        let xq = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 3.0, -1.0]);
        let s = m.posterior_mean_var(&xq).unwrap();
        assert_eq!(s.mean, vec![0.0, 0.0]);
        for sd in s.std {
            assert!((sd - 2f64.sqrt()).abs() < 1e-15);
        }
        let cov = m.posterior_cov(&xq).unwrap();
        let k = KernelSpec::rbf(2.0, 1.0).unwrap().gram(&xq);
        assert!((cov - k).amax() < 1e-15);
    }

    #[test]
    fn empty_fit_is_prior() {
        let x = DMatrix::<f64>::zeros(0, 1);
        let y = DVector::<f64>::zeros(0);
        let m = GpModel::fit(&x, &y, rbf(1.0, 1.0, 0.1), true).unwrap();
        assert_eq!(m.n_train(), 0);
        let s = m.posterior_mean_var(&DMatrix::from_element(1, 1, 0.3)).unwrap();
        assert_eq!(s.mean[0], 0.0);
        assert!((s.std[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_point_scalar_posterior() {
        let x = DMatrix::from_element(1, 1, 0.4);
        let y = DVector::from_element(1, 3.0);
        let m = GpModel::fit(&x, &y, rbf(1.0, 1.0, 1.0), false).unwrap();
        let s = m.posterior_mean_var(&x).unwrap();
        assert!((s.mean[0] - 1.5).abs() < 1e-14);
        assert!((s.std[0] * s.std[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn far_query_reverts_to_prior() {
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 0.5, 1.0]);
        let y = DVector::from_row_slice(&[1.0, -2.0, 0.5]);
        let m = GpModel::fit(&x, &y, rbf(1.5, 0.3, 0.01), false).unwrap();
        let s = m
            .posterior_mean_var(&DMatrix::from_element(1, 1, 1.0 + 10.0 * 0.3))
            .unwrap();
        assert!(s.mean[0].abs() < 1e-6);
        assert!((s.std[0] * s.std[0] - 1.5).abs() < 1e-6);
    }

    #[test]
    fn near_noiseless_interpolation() {
        let x = DMatrix::from_row_slice(4, 1, &[-1.0, -0.3, 0.2, 0.9]);
        let y = DVector::from_row_slice(&[0.3, -1.2, 0.8, 2.0]);
        let m = GpModel::fit(&x, &y, rbf(1.0, 0.5, NOISE_FLOOR), false).unwrap();
        let s = m.posterior_mean_var(&x).unwrap();
        for (mu, yi) in s.mean.iter().zip(y.iter()) {
            assert!((mu - yi).abs() < 1e-4, "{mu} vs {yi}");
        }
    }

    #[test]
    fn factor_reconstructs_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(15, 2, |_, _| rng.random_range(-2.0..2.0));
        let y = DVector::from_fn(15, |_, _| rng.random_range(-1.0..1.0));
        let h = rbf(1.3, 0.7, 0.05);
        let m = GpModel::fit(&x, &y, h, true).unwrap();
        let mut k = h.kernel.gram(&x);
        for i in 0..15 {
            k[(i, i)] += 0.05 + m.jitter();
        }
        let l = m.chol_factor();
        assert!((l * l.transpose() - &k).norm() / k.norm() < 1e-8);
    }

    #[test]
    fn nll_scalar_closed_form() {
        let x = DMatrix::from_element(1, 1, 0.0);
        let y = DVector::from_element(1, 0.0);
        let nll = neg_log_marginal_likelihood(&x, &y, &rbf(1.0, 1.0, 1.0)).unwrap();
        let expected = 0.5 * 2f64.ln() + 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((nll - expected).abs() < 1e-12);
        assert!((nll - 1.26552).abs() < 1e-5);
    }

    #[test]
    fn nll_zero_targets_is_log_det_term() {
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 0.4, 1.1]);
        let y = DVector::zeros(3);
        let h = rbf(1.0, 0.6, 0.2);
        let nll = neg_log_marginal_likelihood(&x, &y, &h).unwrap();
        let mut k = h.kernel.gram(&x);
        for i in 0..3 {
            k[(i, i)] += 0.2;
        }
        let expected = 0.5 * k.determinant().ln() + 1.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((nll - expected).abs() < 1e-12);
    }

    #[test]
    fn nll_requires_data() {
        let x = DMatrix::<f64>::zeros(0, 1);
        let y = DVector::<f64>::zeros(0);
        assert!(neg_log_marginal_likelihood(&x, &y, &rbf(1.0, 1.0, 0.1)).is_err());
    }

    #[test]
    fn cov_diagonal_matches_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(12, 3, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(12, |_, _| rng.random_range(-1.0..1.0));
        let m = GpModel::fit(&x, &y, rbf(0.8, 0.9, 0.01), true).unwrap();
        let xq = DMatrix::from_fn(7, 3, |_, _| rng.random_range(-1.5..1.5));
        let s = m.posterior_mean_var(&xq).unwrap();
        let cov = m.posterior_cov(&xq).unwrap();
        assert_eq!(cov, cov.transpose());
        for i in 0..7 {
            assert!((cov[(i, i)] - s.std[i] * s.std[i]).abs() < 1e-10);
        }
        let single = m.posterior_cov(&xq.rows(0, 1).into_owned()).unwrap();
        assert!((single[(0, 0)] - s.std[0] * s.std[0]).abs() < 1e-10);
    }

    #[test]
    fn query_dimension_checked() {
        let m = GpModel::prior(2, rbf(1.0, 1.0, 0.1)).unwrap();
        assert!(m.posterior_mean_var(&DMatrix::zeros(1, 3)).is_err());
        assert!(m.posterior_cov(&DMatrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn mismatched_targets_rejected() {
        let x = DMatrix::zeros(3, 1);
        let y = DVector::zeros(2);
        assert!(GpModel::fit(&x, &y, rbf(1.0, 1.0, 0.1), false).is_err());
    }

    #[test]
    fn noise_below_floor_rejected() {
        assert!(GpHyperparams::new(KernelSpec::rbf(1.0, 1.0).unwrap(), 1e-9).is_err());
    }
}
