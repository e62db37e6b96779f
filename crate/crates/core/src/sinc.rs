//! Normalised sinc kernel and the Gram matrix it induces on a set of abscissas.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default minimum separation between two abscissas.
pub const DEFAULT_MIN_GAP: f64 = 1e-9;

/// Below this magnitude `sinc` switches to its Taylor expansion.
const SERIES_THRESHOLD: f64 = 1e-6;

/// `sin(pi x)` with the argument reduced to `[-1/2, 1/2]` first, so the result is
/// exactly zero at integers and keeps full accuracy for large `|x|`.
fn sin_pi(x: f64) -> f64 {
    let n = x.round();
    let r = x - n;
    let s = (PI * r).sin();
    if n.rem_euclid(2.0) == 0.0 {
        s
    } else {
        -s
    }
}

/// Normalised sinc, `sin(pi x) / (pi x)`, with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() > SERIES_THRESHOLD {
        sin_pi(x) / (PI * x)
    } else {
        let p2 = (PI * x) * (PI * x);
        1.0 - p2 / 6.0 + p2 * p2 / 120.0
    }
}

/// Fails with [`Error::DuplicateAbscissa`] if two abscissas are within `min_gap`.
pub fn check_distinct(abscissas: &[f64], min_gap: f64) -> Result<()> {
    if let Some(i) = abscissas.iter().position(|x| !x.is_finite()) {
        return Err(Error::param(
            "abscissas",
            format!("entry {i} is not finite"),
        ));
    }
    let mut order: Vec<usize> = (0..abscissas.len()).collect();
    order.sort_by(|&a, &b| abscissas[a].total_cmp(&abscissas[b]));
    for pair in order.windows(2) {
        if abscissas[pair[1]] - abscissas[pair[0]] <= min_gap {
            let (first, second) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            return Err(Error::DuplicateAbscissa {
                first,
                second,
                tolerance: min_gap,
            });
        }
    }
    Ok(())
}

/// Gram matrix `[G]_{m,m'} = sinc(x_m - x_m')` using the default duplicate tolerance.
pub fn build_gram(abscissas: &[f64]) -> Result<DMatrix<f64>> {
    build_gram_with_gap(abscissas, DEFAULT_MIN_GAP)
}

pub fn build_gram_with_gap(abscissas: &[f64], min_gap: f64) -> Result<DMatrix<f64>> {
    check_distinct(abscissas, min_gap)?;
    let n = abscissas.len();
    let mut gram = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = sinc(abscissas[i] - abscissas[j]);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    Ok(gram)
}

/// Residual of the reproducing identity `sum_p sinc(y-p) sinc(y'-p) = sinc(y-y')`
/// when the sum is truncated to `|p| <= truncation`.
///
/// Test utility; the estimator never truncates this series.
pub fn kernel_identity_residual(y: f64, y_prime: f64, truncation: u64) -> f64 {
    let p_max = truncation as i64;
    let mut sum = 0.0;
    let mut comp = 0.0;
    for p in -p_max..=p_max {
        let p = p as f64;
        let term = sinc(y - p) * sinc(y_prime - p);
        // Neumaier summation; the series has many tiny tail terms.
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    ((sum + comp) - sinc(y - y_prime)).abs()
}
