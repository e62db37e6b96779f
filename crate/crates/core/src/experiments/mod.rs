//! Pilot-aided channel estimation experiments: configuration, analytic MSE of
//! linear estimators and the runners for RMS curves, the delay/frequency reduction
//! surface and the bound-dominance suite.

mod bound_check;
mod curves;
mod surface;

pub use bound_check::{run_bound_check, BoundCheckConfig, ConfigReport, PointReport, SignalMode};
pub use curves::{run_rms_curves, trial_channels, RmsCurve, SweepPoint};
pub use surface::{default_tau_grid, run_delay_frequency_surface, RmsSurface, SIGN_CONVENTION};

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ofdm::{PilotGrid, SincSpectrumEstimator};
use crate::tdl::{TapWindow, TdlEstimator, TdlModelSpec};

/// Values below this are reported as [`DB_FLOOR`].
pub const DB_CLAMP_THRESHOLD: f64 = 1e-300;
pub const DB_FLOOR: f64 = -3000.0;

/// `10 log10(value)` for power-like quantities, clamped at -3000 dB near zero.
pub fn db(value: f64) -> f64 {
    if value < DB_CLAMP_THRESHOLD {
        DB_FLOOR
    } else {
        10.0 * value.log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "ML")]
    Ml,
    #[serde(rename = "PE")]
    Pe,
    #[serde(rename = "PEInf")]
    PeInf,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::Ml, Estimator::Pe, Estimator::PeInf];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Ml => "ML",
            Estimator::Pe => "PE",
            Estimator::PeInf => "PEInf",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ml" => Ok(Estimator::Ml),
            "pe" => Ok(Estimator::Pe),
            "peinf" => Ok(Estimator::PeInf),
            _ => Err(Error::param(
                "estimator",
                format!("unknown estimator `{s}`"),
            )),
        }
    }
}

/// OFDM pilot-aided estimation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dft_size: usize,
    pub n_modulated: usize,
    pub n_pilots: usize,
    /// Pilot `m` sits on carrier `pilot_step * m`.
    pub pilot_step: i64,
    /// Carrier spacing in Hz.
    pub carrier_spacing: f64,
    /// SNR `E|H|^2 / sigma_E^2` in dB, with `E|H|^2 = 1`.
    pub gamma_db: f64,
    /// `T_h = alpha / B_av`.
    pub alpha: f64,
    pub trials: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    /// Poisson parameter of the extra tap count.
    pub lambda: f64,
    /// `A` with `|H(f)| <= A`; PE uses `mu = sigma_E^2 / A^2`.
    pub amplitude_bound: f64,
    /// Evaluate only non-pilot carriers.
    pub data_carriers_only: bool,
    pub ml_window: TapWindow,
    /// Fixed ML tap count; `None` sweeps `1..=M` and keeps the best.
    pub ml_taps: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dft_size: 512,
            n_modulated: 433,
            n_pilots: 28,
            pilot_step: 16,
            carrier_spacing: 1.0,
            gamma_db: 30.0,
            alpha: 0.25,
            trials: 2000,
            seed: 1,
            estimators: Estimator::ALL.to_vec(),
            lambda: 9.0,
            amplitude_bound: 1.0,
            data_carriers_only: false,
            ml_window: TapWindow::Centered,
            ml_taps: None,
        }
    }
}

impl ExperimentConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::param(
                "alpha",
                format!("{} is outside the valid range ]0, 1]", self.alpha),
            ));
        }
        if self.trials == 0 {
            return Err(Error::param("trials", "must be at least 1"));
        }
        if self.n_pilots < 2 {
            return Err(Error::param("n_pilots", "at least two pilots are required"));
        }
        if self.pilot_step <= 0 {
            return Err(Error::param("pilot_step", "must be positive"));
        }
        let last_pilot = self.pilot_step * (self.n_pilots as i64 - 1);
        if last_pilot >= self.n_modulated as i64 {
            return Err(Error::param(
                "pilot indices",
                format!(
                    "last pilot {last_pilot} lies outside the {} modulated carriers",
                    self.n_modulated
                ),
            ));
        }
        if self.n_modulated > self.dft_size {
            return Err(Error::param("n_modulated", "cannot exceed the DFT size"));
        }
        if !(self.carrier_spacing.is_finite() && self.carrier_spacing > 0.0) {
            return Err(Error::param("carrier_spacing", "must be finite and > 0"));
        }
        if self.gamma_db.is_nan() {
            return Err(Error::param("gamma_db", "must be a number"));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::param("lambda", "must be finite and > 0"));
        }
        if !(self.amplitude_bound.is_finite() && self.amplitude_bound > 0.0) {
            return Err(Error::param("amplitude_bound", "must be finite and > 0"));
        }
        if self.estimators.is_empty() {
            return Err(Error::param("estimators", "select at least one estimator"));
        }
        if let Some(n) = self.ml_taps {
            if n == 0 || n > self.n_pilots {
                return Err(Error::param(
                    "ml_taps",
                    format!("must lie in 1..={}", self.n_pilots),
                ));
            }
        }
        Ok(())
    }

    pub fn pilot_grid(&self) -> Result<PilotGrid> {
        PilotGrid::uniform(0, self.pilot_step, self.n_pilots, self.carrier_spacing)
    }

    pub fn delay_spread(&self) -> Result<f64> {
        delay_spread_from_alpha(self.alpha, average_pilot_bandwidth(&self.pilot_grid()?))
    }

    /// `sigma_E^2 = 1 / gamma` for unit channel power.
    pub fn noise_variance(&self) -> f64 {
        10f64.powf(-self.gamma_db / 10.0)
    }

    pub fn mu(&self) -> f64 {
        self.noise_variance() / (self.amplitude_bound * self.amplitude_bound)
    }

    /// TDL spacing `1 / (N_DFT delta_f)`.
    pub fn tap_spacing(&self) -> f64 {
        1.0 / (self.dft_size as f64 * self.carrier_spacing)
    }

    pub fn evaluation_carriers(&self) -> Vec<i64> {
        let step = self.pilot_step;
        let last_pilot = step * (self.n_pilots as i64 - 1);
        (0..self.n_modulated as i64)
            .filter(|&i| !(self.data_carriers_only && i % step == 0 && i <= last_pilot))
            .collect()
    }

    pub fn includes(&self, e: Estimator) -> bool {
        self.estimators.contains(&e)
    }

    /// ML tap counts to evaluate.
    pub fn ml_candidates(&self) -> Vec<usize> {
        match self.ml_taps {
            Some(n) => vec![n],
            None => (1..=self.n_pilots).collect(),
        }
    }

    pub fn ml_spec(&self, n_taps: usize) -> Result<TdlModelSpec> {
        TdlModelSpec::with_window(
            self.ml_window,
            self.tap_spacing(),
            n_taps,
            self.delay_spread()?,
        )
    }
}

/// `B_av = (i_{M-1} - i_0) / (M - 1) * delta_f`.
pub fn average_pilot_bandwidth(grid: &PilotGrid) -> f64 {
    grid.average_bandwidth()
}

/// `T_h = alpha / B_av` for `alpha` in `]0, 1]`.
pub fn delay_spread_from_alpha(alpha: f64, average_bandwidth: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::param(
            "alpha",
            format!("{alpha} is outside the valid range ]0, 1]"),
        ));
    }
    if !(average_bandwidth.is_finite() && average_bandwidth > 0.0) {
        return Err(Error::param("average_bandwidth", "must be finite and > 0"));
    }
    Ok(alpha / average_bandwidth)
}

/// Expected squared error of `H_hat(f) = sum_m w_m V_m` for a deterministic channel
/// under i.i.d. circular noise of variance `noise_variance`:
/// `|H(f) - sum_m w_m H(f_m)|^2 + noise_variance * sum_m |w_m|^2`.
pub fn analytic_linear_mse(
    weights: &[Complex64],
    h_true: Complex64,
    pilot_values: &[Complex64],
    noise_variance: f64,
) -> f64 {
    let (interp, gain) = weights
        .iter()
        .zip(pilot_values)
        .fold((Complex64::new(0.0, 0.0), 0.0), |(acc, g), (w, h)| {
            (acc + w * h, g + w.norm_sqr())
        });
    (h_true - interp).norm_sqr() + noise_variance * gain
}

/// A linear estimator tabulated on a fixed set of evaluation frequencies.
#[derive(Debug, Clone)]
pub(crate) struct WeightTable {
    /// Row-major `n_freqs x M`.
    weights: Vec<Complex64>,
    noise_gain: Vec<f64>,
    n_pilots: usize,
}

impl WeightTable {
    pub(crate) fn from_fn<F>(freqs: &[f64], n_pilots: usize, mut weights_at: F) -> Self
    where
        F: FnMut(f64) -> Vec<Complex64>,
    {
        let mut weights = Vec::with_capacity(freqs.len() * n_pilots);
        let mut noise_gain = Vec::with_capacity(freqs.len());
        for &f in freqs {
            let w = weights_at(f);
            debug_assert_eq!(w.len(), n_pilots);
            noise_gain.push(w.iter().map(|x| x.norm_sqr()).sum());
            weights.extend(w);
        }
        Self {
            weights,
            noise_gain,
            n_pilots,
        }
    }

    pub(crate) fn sinc(est: &SincSpectrumEstimator, freqs: &[f64]) -> Self {
        Self::from_fn(freqs, est.grid().len(), |f| est.weights(f))
    }

    pub(crate) fn tdl(est: &TdlEstimator, freqs: &[f64]) -> Self {
        Self::from_fn(freqs, est.pilot_freqs().len(), |f| est.weights(f))
    }

    pub(crate) fn row(&self, i: usize) -> &[Complex64] {
        &self.weights[i * self.n_pilots..(i + 1) * self.n_pilots]
    }

    /// Per-frequency analytic MSE, added onto `out`.
    pub(crate) fn accumulate_mse(
        &self,
        h_eval: &[Complex64],
        h_pilots: &[Complex64],
        noise_variance: f64,
        out: &mut [f64],
    ) {
        for (i, (acc, &h)) in out.iter_mut().zip(h_eval).enumerate() {
            let interp: Complex64 = self.row(i).iter().zip(h_pilots).map(|(w, hp)| w * hp).sum();
            *acc += (h - interp).norm_sqr() + noise_variance * self.noise_gain[i];
        }
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn db_examples() {
        assert_eq!(db(1.0), 0.0);
        assert_relative_eq!(db(1e-3), -30.0, epsilon = 1e-12);
        assert_eq!(db(0.0), DB_FLOOR);
        assert_eq!(db(1e-301), DB_FLOOR);
    }

    #[test]
    fn bandwidth_and_delay_spread() {
        let cfg = ExperimentConfig::default();
        let grid = cfg.pilot_grid().unwrap();
        assert_eq!(average_pilot_bandwidth(&grid), 16.0);
        assert_eq!(delay_spread_from_alpha(0.25, 16.0).unwrap(), 1.0 / 64.0);
        assert_eq!(delay_spread_from_alpha(0.125, 16.0).unwrap(), 1.0 / 128.0);
        let th = delay_spread_from_alpha(1.0, 16.0).unwrap();
        let xs: Vec<f64> = grid.frequencies().iter().map(|f| f * th).collect();
        for (m, x) in xs.iter().enumerate() {
            assert_eq!(*x, m as f64);
        }
        for &d in &[3i64, 7, 16] {
            for &count in &[2usize, 5, 30] {
                let g = PilotGrid::uniform(4, d, count, 1.0).unwrap();
                assert_eq!(average_pilot_bandwidth(&g), d as f64);
            }
        }
        assert!(delay_spread_from_alpha(1.5, 16.0).is_err());
        assert!(delay_spread_from_alpha(0.0, 16.0).is_err());
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_relative_eq!(cfg.noise_variance(), 1e-3, max_relative = 1e-15);
        assert_eq!(cfg.evaluation_carriers().len(), 433);
        let data_only = ExperimentConfig {
            data_carriers_only: true,
            ..cfg.clone()
        };
        assert_eq!(data_only.evaluation_carriers().len(), 433 - 28);
        assert!(ExperimentConfig::with_alpha(1.5).validate().is_err());
        assert!(ExperimentConfig {
            trials: 0,
            ..cfg.clone()
        }
        .validate()
        .is_err());
        assert!(ExperimentConfig {
            n_pilots: 29,
            ..cfg
        }
        .validate()
        .is_err());
    }

    #[test]
    fn analytic_mse_examples() {
        let w = [Complex64::new(0.5, 0.1), Complex64::new(-0.2, 0.3)];
        let zero = [Complex64::new(0.0, 0.0); 2];
        let gain: f64 = w.iter().map(|x| x.norm_sqr()).sum();
        assert_relative_eq!(
            analytic_linear_mse(&w, Complex64::new(0.0, 0.0), &zero, 0.3),
            0.3 * gain,
            max_relative = 1e-15
        );
        let interp = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let hp = [Complex64::new(0.7, -0.4), Complex64::new(2.0, 1.0)];
        assert_eq!(analytic_linear_mse(&interp, hp[0], &hp, 0.0), 0.0);
    }

    #[test]
    fn estimator_names_round_trip() {
        for e in Estimator::ALL {
            assert_eq!(e.name().parse::<Estimator>().unwrap(), e);
            let json = serde_json::to_string(&e).unwrap();
            assert_eq!(json, format!("\"{}\"", e.name()));
        }
        assert!("tdl".parse::<Estimator>().is_err());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }
}
