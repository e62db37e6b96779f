//! Ridge-regularised sinc estimator for bounded band-limited signals.
//!
//! For a signal `s(x)` with `|s(x)| <= A` and spectrum inside `]-1/2, 1/2[`,
//! observed as `z_m = s(x_m) + e_m` with complex noise of variance `sigma^2`, the
//! linear estimator `s_hat(x) = c(x)^T z` with
//!
//! ```text
//! c(x) = (G + mu I)^{-1} g(x),   [G]_{m,m'} = sinc(x_m - x_m'),   [g(x)]_m = sinc(x - x_m)
//! ```
//!
//! and `mu = sigma^2 / A^2` minimises the quadratic error bound
//!
//! ```text
//! A^2 (c^T (G + mu I) c - 2 c^T g(x) + 1)
//! ```
//!
//! whose minimum value `A^2 (1 - g(x)^T c(x))` is returned by
//! [`EstimatorDesign::error_bound`].
//!
//! The bound holds for the mean squared error averaged over signals whose
//! integer-grid samples are uncorrelated with power at most `A^2`. A single fixed
//! signal can exceed it where its samples line up with the residual kernel.

use log::warn;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sinc::{build_gram_with_gap, sinc, DEFAULT_MIN_GAP};

/// Relative size of the fallback ridge used when `G + mu I` is not numerically
/// positive definite: `FALLBACK_RIDGE_SCALE * trace(G) / M`.
pub const FALLBACK_RIDGE_SCALE: f64 = 1e-12;

/// Noisy samples of a bounded signal, in the same order as the design abscissas.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleVector {
    pub values: Vec<Complex64>,
    /// Total variance of each complex noise sample (both quadratures together).
    pub noise_variance: f64,
    /// `A` with `|s(x)| <= A`.
    pub amplitude_bound: f64,
}

impl SampleVector {
    pub fn new(values: Vec<Complex64>, noise_variance: f64, amplitude_bound: f64) -> Result<Self> {
        if !(noise_variance.is_finite() && noise_variance >= 0.0) {
            return Err(Error::param("noise_variance", "must be finite and >= 0"));
        }
        if !(amplitude_bound.is_finite() && amplitude_bound > 0.0) {
            return Err(Error::param("amplitude_bound", "must be finite and > 0"));
        }
        Ok(Self {
            values,
            noise_variance,
            amplitude_bound,
        })
    }

    /// Regularisation `mu = sigma^2 / A^2`.
    pub fn mu(&self) -> f64 {
        self.noise_variance / (self.amplitude_bound * self.amplitude_bound)
    }
}

/// Abscissas, Gram matrix and the cached factorisation of `G + mu I`.
///
/// Immutable once built; share it freely between threads.
#[derive(Debug, Clone)]
pub struct EstimatorDesign {
    abscissas: Vec<f64>,
    mu: f64,
    ridge: f64,
    gram: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
}

impl EstimatorDesign {
    pub fn new(abscissas: &[f64], mu: f64) -> Result<Self> {
        Self::with_min_gap(abscissas, mu, DEFAULT_MIN_GAP)
    }

    /// Design whose `mu` is taken from the samples' noise variance and amplitude bound.
    pub fn for_samples(abscissas: &[f64], samples: &SampleVector) -> Result<Self> {
        Self::new(abscissas, samples.mu())
    }

    pub fn with_min_gap(abscissas: &[f64], mu: f64, min_gap: f64) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::param("mu", "must be finite and >= 0"));
        }
        if abscissas.is_empty() {
            return Err(Error::param(
                "abscissas",
                "at least one abscissa is required",
            ));
        }
        let gram = build_gram_with_gap(abscissas, min_gap)?;
        let m = abscissas.len();

        let (factor, ridge) = match factorize(&gram, mu) {
            Some(f) => (f, mu),
            None => {
                let ridge = (FALLBACK_RIDGE_SCALE * gram.trace() / m as f64).max(mu);
                warn!(
                    "G + {mu:e} I is not numerically positive definite ({m} abscissas); \
                     retrying with ridge {ridge:e}"
                );
                let f = factorize(&gram, ridge).ok_or(Error::SingularSystem { ridge })?;
                (f, ridge)
            }
        };

        Ok(Self {
            abscissas: abscissas.to_vec(),
            mu,
            ridge,
            gram,
            factor,
        })
    }

    pub fn abscissas(&self) -> &[f64] {
        &self.abscissas
    }

    pub fn len(&self) -> usize {
        self.abscissas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissas.is_empty()
    }

    /// The requested regularisation.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// The ridge actually factorised; differs from [`mu`](Self::mu) only after a fallback.
    pub fn effective_ridge(&self) -> f64 {
        self.ridge
    }

    pub fn used_fallback(&self) -> bool {
        self.ridge != self.mu
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `g(x)` with `[g(x)]_m = sinc(x - x_m)`.
    pub fn kernel_vector(&self, x: f64) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.abscissas.iter().map(|&xm| sinc(x - xm)))
    }

    /// Real coefficient vector `c(x) = (G + mu I)^{-1} g(x)`.
    pub fn coefficients(&self, x: f64) -> DVector<f64> {
        self.factor.solve(&self.kernel_vector(x))
    }

    /// `c(x)^T z`.
    pub fn estimate(&self, samples: &SampleVector, x: f64) -> Result<Complex64> {
        self.check_len(samples.values.len())?;
        let c = self.coefficients(x);
        Ok(c.iter()
            .zip(&samples.values)
            .map(|(&cm, &zm)| zm * cm)
            .sum())
    }

    /// Squared-error bound `A^2 (1 - g(x)^T (G + mu I)^{-1} g(x))`, clamped at zero.
    pub fn error_bound(&self, amplitude_bound: f64, x: f64) -> f64 {
        let g = self.kernel_vector(x);
        let c = self.factor.solve(&g);
        let a2 = amplitude_bound * amplitude_bound;
        (a2 * (1.0 - g.dot(&c))).max(0.0)
    }

    /// Normalised quadratic form `c^T (G + mu I) c - 2 c^T g(x) + 1` that the
    /// coefficients minimise (multiply by `A^2` for the bound).
    pub fn quadratic_form(&self, c: &DVector<f64>, x: f64) -> Result<f64> {
        self.check_len(c.len())?;
        let g = self.kernel_vector(x);
        let gc = &self.gram * c;
        Ok(c.dot(&gc) + self.ridge * c.norm_squared() - 2.0 * c.dot(&g) + 1.0)
    }

    fn check_len(&self, actual: usize) -> Result<()> {
        if actual != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual,
            });
        }
        Ok(())
    }
}

/// Cholesky factor of `gram + ridge I`, or `None` if a pivot is not safely positive.
fn factorize(gram: &DMatrix<f64>, ridge: f64) -> Option<Cholesky<f64, Dyn>> {
    let n = gram.nrows();
    let mut a = gram.clone();
    for i in 0..n {
        a[(i, i)] += ridge;
    }
    let max_diag = a.diagonal().max();
    let tol = n as f64 * f64::EPSILON * max_diag;
    let chol = Cholesky::new(a)?;
    let min_pivot = chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|d| d * d)
        .fold(f64::INFINITY, f64::min);
    (min_pivot > tol).then_some(chol)
}
