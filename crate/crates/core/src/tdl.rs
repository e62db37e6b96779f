//! Tapped-delay-line channel model and its deterministic maximum-likelihood
//! (least-squares) estimator.
//!
//! The TDL model approximates `H(f) ~ T sum_{q=q1}^{q2} h_q exp(-j 2 pi q T f)`.
//! Fitting the tap weights to pilot observations by least squares and evaluating
//! the model at any frequency gives a linear estimator `H_hat(f) = w(f)^T V`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ofdm::PilotObservations;

/// Normal-equation condition numbers above this are treated as rank deficient.
pub const MAX_CONDITION: f64 = 1e12;

/// Placement of the tap window for a given tap count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TapWindow {
    /// Taps `0 ..= n - 1`.
    Causal,
    /// Taps centred on the middle of the delay support `]0, T_h[`.
    Centered,
}

/// Tap spacing `T` and the contiguous tap index range `[q1, q2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdlModelSpec {
    pub spacing: f64,
    pub first_tap: i64,
    pub n_taps: usize,
}

impl TdlModelSpec {
    pub fn new(spacing: f64, first_tap: i64, n_taps: usize) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::param("tap spacing", "must be finite and > 0"));
        }
        if n_taps == 0 {
            return Err(Error::param("n_taps", "must be at least 1"));
        }
        Ok(Self {
            spacing,
            first_tap,
            n_taps,
        })
    }

    pub fn causal(spacing: f64, n_taps: usize) -> Result<Self> {
        Self::new(spacing, 0, n_taps)
    }

    /// `n_taps` taps whose centre is as close as possible to `T_h / 2`.
    pub fn centered(spacing: f64, n_taps: usize, delay_spread: f64) -> Result<Self> {
        let centre = delay_spread / (2.0 * spacing);
        let first = (centre - (n_taps as f64 - 1.0) / 2.0).round() as i64;
        Self::new(spacing, first, n_taps)
    }

    pub fn with_window(
        window: TapWindow,
        spacing: f64,
        n_taps: usize,
        delay_spread: f64,
    ) -> Result<Self> {
        match window {
            TapWindow::Causal => Self::causal(spacing, n_taps),
            TapWindow::Centered => Self::centered(spacing, n_taps, delay_spread),
        }
    }

    pub fn last_tap(&self) -> i64 {
        self.first_tap + self.n_taps as i64 - 1
    }

    pub fn tap_indices(&self) -> impl Iterator<Item = i64> {
        self.first_tap..=self.last_tap()
    }

    /// `[a(f)]_q = T exp(-j 2 pi q T f)`.
    pub fn steering(&self, f: f64) -> Vec<Complex64> {
        self.tap_indices()
            .map(|q| Complex64::from_polar(self.spacing, -2.0 * PI * q as f64 * self.spacing * f))
            .collect()
    }
}

/// `[W]_{m,q} = T exp(-j 2 pi q T f_m)`.
pub fn build_design_matrix(spec: &TdlModelSpec, pilot_freqs: &[f64]) -> Result<DMatrix<Complex64>> {
    if spec.n_taps > pilot_freqs.len() {
        return Err(Error::IdentifiabilityViolation {
            n_taps: spec.n_taps,
            n_pilots: pilot_freqs.len(),
        });
    }
    let cols: Vec<Vec<Complex64>> = pilot_freqs.iter().map(|&f| spec.steering(f)).collect();
    Ok(DMatrix::from_fn(pilot_freqs.len(), spec.n_taps, |m, q| {
        cols[m][q]
    }))
}

/// Fitted tap weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TdlFit {
    pub tap_weights: Vec<Complex64>,
    pub model: TdlModelSpec,
}

impl TdlFit {
    /// Model spectrum `T sum_q h_q exp(-j 2 pi q T f)`.
    pub fn spectrum(&self, f: f64) -> Complex64 {
        self.model
            .steering(f)
            .iter()
            .zip(&self.tap_weights)
            .map(|(a, h)| a * h)
            .sum()
    }
}

/// Least-squares TDL estimator for one pilot grid: `W^+ = R^{-1} Q^H` from a QR
/// factorisation of the design matrix.
#[derive(Debug, Clone)]
pub struct TdlEstimator {
    spec: TdlModelSpec,
    pilot_freqs: Vec<f64>,
    /// `n_taps x M`.
    pinv: DMatrix<Complex64>,
    condition: f64,
}

impl TdlEstimator {
    pub fn new(spec: TdlModelSpec, pilot_freqs: &[f64]) -> Result<Self> {
        let w = build_design_matrix(&spec, pilot_freqs)?;
        let qr = w.qr();
        let r = qr.r();
        let sv = r.clone().singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        let condition = if smin > 0.0 {
            (smax / smin).powi(2)
        } else {
            f64::INFINITY
        };
        if condition.is_nan() || condition > MAX_CONDITION {
            return Err(Error::RankDeficient { condition });
        }
        let pinv = r
            .solve_upper_triangular(&qr.q().adjoint())
            .ok_or(Error::RankDeficient { condition })?;
        Ok(Self {
            spec,
            pilot_freqs: pilot_freqs.to_vec(),
            pinv,
            condition,
        })
    }

    pub fn spec(&self) -> &TdlModelSpec {
        &self.spec
    }

    pub fn pilot_freqs(&self) -> &[f64] {
        &self.pilot_freqs
    }

    /// Condition number estimate of `W^H W`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn fit_values(&self, values: &[Complex64]) -> Result<TdlFit> {
        if values.len() != self.pilot_freqs.len() {
            return Err(Error::LengthMismatch {
                expected: self.pilot_freqs.len(),
                actual: values.len(),
            });
        }
        let tap_weights = (0..self.spec.n_taps)
            .map(|q| {
                (0..values.len())
                    .map(|m| self.pinv[(q, m)] * values[m])
                    .sum()
            })
            .collect();
        Ok(TdlFit {
            tap_weights,
            model: self.spec,
        })
    }

    /// `w(f)` with `H_hat(f) = w(f)^T V`: `w(f)^T = a(f)^T W^+`.
    pub fn weights(&self, f: f64) -> Vec<Complex64> {
        let a = self.spec.steering(f);
        (0..self.pinv.ncols())
            .map(|m| {
                a.iter()
                    .enumerate()
                    .map(|(q, aq)| aq * self.pinv[(q, m)])
                    .sum()
            })
            .collect()
    }
}

/// Least-squares tap weights for `obs` under `spec`.
pub fn ml_fit(obs: &PilotObservations, spec: &TdlModelSpec) -> Result<TdlFit> {
    TdlEstimator::new(*spec, &obs.grid.frequencies())?.fit_values(&obs.values)
}

/// Linear-estimator weights of the TDL ML estimator at frequency `f`.
pub fn tdl_weights(spec: &TdlModelSpec, pilot_freqs: &[f64], f: f64) -> Result<Vec<Complex64>> {
    Ok(TdlEstimator::new(*spec, pilot_freqs)?.weights(f))
}

/// Returns the candidate with the smallest score and that score. Ties and NaN
/// scores resolve toward the earliest candidate, so pass candidates in ascending
/// tap count.
pub fn sweep_tap_count<I, F>(candidates: I, mut score: F) -> Option<(usize, f64)>
where
    I: IntoIterator<Item = usize>,
    F: FnMut(usize) -> f64,
{
    let mut best: Option<(usize, f64)> = None;
    for n in candidates {
        let s = score(n);
        match best {
            Some((_, b)) if s.is_nan() || s >= b => {}
            _ if s.is_nan() => {}
            _ => best = Some((n, s)),
        }
    }
    best
}
