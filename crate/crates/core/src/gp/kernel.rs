use nalgebra::DMatrix;

use crate::{Error, Result};

/// Base covariance function.
///
/// The RBF kernel uses the squared-lengthscale convention
/// `outputscale * exp(-|x - x'|^2 / (2 * lengthscale^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Rbf { outputscale: f64, lengthscale: f64 },
    Linear { variance: f64, bias_variance: f64 },
}

/// Which kernel family a configuration asks for, without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Rbf,
    Linear,
}

impl KernelSpec {
    pub fn rbf(outputscale: f64, lengthscale: f64) -> Result<Self> {
        let spec = KernelSpec::Rbf {
            outputscale,
            lengthscale,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn linear(variance: f64, bias_variance: f64) -> Result<Self> {
        let spec = KernelSpec::Linear {
            variance,
            bias_variance,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Unit-scale parameters for a family; the starting point of hyperparameter search.
    pub fn default_for(family: KernelFamily) -> Self {
        match family {
            KernelFamily::Rbf => KernelSpec::Rbf {
                outputscale: 1.0,
                lengthscale: 1.0,
            },
            KernelFamily::Linear => KernelSpec::Linear {
                variance: 1.0,
                bias_variance: 1.0,
            },
        }
    }

    pub fn family(&self) -> KernelFamily {
        match self {
            KernelSpec::Rbf { .. } => KernelFamily::Rbf,
            KernelSpec::Linear { .. } => KernelFamily::Linear,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            KernelSpec::Rbf {
                outputscale,
                lengthscale,
            } => positive(outputscale) && positive(lengthscale),
            KernelSpec::Linear {
                variance,
                bias_variance,
            } => positive(variance) && bias_variance.is_finite() && bias_variance >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid kernel parameters: {self:?}")))
        }
    }

    /// Evaluates `k(x, x')`.
    pub fn eval(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        if x.len() != x2.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: x2.len(),
            });
        }
        Ok(self.eval_iter(x.iter().copied().zip(x2.iter().copied())))
    }

    fn eval_iter(&self, pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
        match *self {
            KernelSpec::Rbf {
                outputscale,
                lengthscale,
            } => {
                let sq: f64 = pairs.map(|(a, b)| (a - b) * (a - b)).sum();
                outputscale * (-sq / (2.0 * lengthscale * lengthscale)).exp()
            }
            KernelSpec::Linear {
                variance,
                bias_variance,
            } => variance * pairs.map(|(a, b)| a * b).sum::<f64>() + bias_variance,
        }
    }

    /// Prior variance `k(x, x)` of the row `row` of `x`.
    pub(crate) fn diag_row(&self, x: &DMatrix<f64>, row: usize) -> f64 {
        match *self {
            KernelSpec::Rbf { outputscale, .. } => outputscale,
            KernelSpec::Linear {
                variance,
                bias_variance,
            } => variance * x.row(row).norm_squared() + bias_variance,
        }
    }

    /// Cross-covariance matrix between the rows of `a` (n x d) and `b` (m x d).
    pub fn matrix(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if a.ncols() != b.ncols() && a.nrows() > 0 && b.nrows() > 0 {
            return Err(Error::DimensionMismatch {
                expected: a.ncols(),
                got: b.ncols(),
            });
        }
        // Row-major copies keep the inner loop contiguous.
        let at = a.transpose();
        let bt = b.transpose();
        let d = at.nrows();
        let (ad, bd) = (at.as_slice(), bt.as_slice());
        Ok(DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
            let xi = &ad[i * d..(i + 1) * d];
            let xj = &bd[j * d..(j + 1) * d];
            self.eval_iter(xi.iter().copied().zip(xj.iter().copied()))
        }))
    }

    /// Symmetric kernel matrix of `x` with itself; exact symmetry is enforced.
    pub fn gram(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let xt = x.transpose();
        let d = xt.nrows();
        let data = xt.as_slice();
        let n = x.nrows();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            let xi = &data[i * d..(i + 1) * d];
            for j in 0..=i {
                let xj = &data[j * d..(j + 1) * d];
                let v = self.eval_iter(xi.iter().copied().zip(xj.iter().copied()));
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    /// Log-space parameter vector used by the hyperparameter search.
    pub(crate) fn to_log(self) -> Vec<f64> {
        match self {
            KernelSpec::Rbf {
                outputscale,
                lengthscale,
            } => vec![outputscale.ln(), lengthscale.ln()],
            KernelSpec::Linear {
                variance,
                bias_variance,
            } => vec![variance.ln(), bias_variance.ln()],
        }
    }

    pub(crate) fn from_log(family: KernelFamily, p: &[f64]) -> Self {
        match family {
            KernelFamily::Rbf => KernelSpec::Rbf {
                outputscale: p[0].exp(),
                lengthscale: p[1].exp(),
            },
            KernelFamily::Linear => KernelSpec::Linear {
                variance: p[0].exp(),
                bias_variance: p[1].exp(),
            },
        }
    }
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

/// `k(x, x')` for one pair of points.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], x2: &[f64]) -> Result<f64> {
    spec.eval(x, x2)
}

/// Kernel matrix between the rows of `a` and `b`.
pub fn kernel_matrix(spec: &KernelSpec, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spec.matrix(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn rbf_at_same_point_is_outputscale() {
        let k = KernelSpec::rbf(1.0, 1.0).unwrap();
        assert_eq!(k.eval(&[0.3, -0.2], &[0.3, -0.2]).unwrap(), 1.0);
    }

    #[test]
    fn rbf_unit_distance() {
        let k = KernelSpec::rbf(1.0, 1.0).unwrap();
        assert_relative_eq!(
            k.eval(&[0.0], &[1.0]).unwrap(),
            0.606_530_659_712_633_4,
            epsilon = 1e-15
        );
    }

    #[test]
    fn linear_dot_product() {
        let k = KernelSpec::linear(2.0, 0.0).unwrap();
        assert_eq!(k.eval(&[1.0, 2.0], &[3.0, 1.0]).unwrap(), 10.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let k = KernelSpec::rbf(1.0, 1.0).unwrap();
        assert!(matches!(
            k.eval(&[1.0, 2.0], &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let a = DMatrix::zeros(2, 3);
        let b = DMatrix::zeros(2, 2);
        assert!(k.matrix(&a, &b).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(KernelSpec::rbf(0.0, 1.0).is_err());
        assert!(KernelSpec::rbf(1.0, -1.0).is_err());
        assert!(KernelSpec::linear(1.0, -0.1).is_err());
        assert!(KernelSpec::linear(1.0, 0.0).is_ok());
    }

    #[test]
    fn empty_and_duplicate_rows() {
        let k = KernelSpec::rbf(3.0, 1.0).unwrap();
        let empty = DMatrix::<f64>::zeros(0, 2);
        let b = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 1.0, 2.0, 2.0]);
        let m = k.matrix(&empty, &b).unwrap();
        assert_eq!(m.shape(), (0, 3));

        let single = DMatrix::from_row_slice(1, 2, &[0.5, 0.5]);
        assert_eq!(k.gram(&single), DMatrix::from_element(1, 1, 3.0));

        let dup = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        assert_eq!(k.gram(&dup), DMatrix::from_element(2, 2, 3.0));
    }

    fn matrix_strategy() -> impl Strategy<Value = DMatrix<f64>> {
        (1usize..12, 1usize..4).prop_flat_map(|(n, d)| {
            proptest::collection::vec(-3.0f64..3.0, n * d).prop_map(move |v| DMatrix::from_row_slice(n, d, &v))
        })
    }

    proptest! {
        #[test]
        fn gram_symmetric_and_psd(x in matrix_strategy(), os in 0.1f64..5.0, l in 0.1f64..3.0, lin in proptest::bool::ANY) {
            let k = if lin { KernelSpec::linear(os, l).unwrap() } else { KernelSpec::rbf(os, l).unwrap() };
            let g = k.gram(&x);
            prop_assert_eq!(&g, &g.transpose());
            let cross = k.matrix(&x, &x).unwrap();
            prop_assert!((&cross - &g).amax() < 1e-12);
            let min_eig = g.clone().symmetric_eigen().eigenvalues.min();
            prop_assert!(min_eig >= -1e-8 * g.trace());
        }
    }
}
