//! Monte Carlo check of the squared-error bound on small random configurations.
//!
//! Each configuration draws a handful of abscissas, a noise level and a finite
//! sinc-series signal `s(x) = sum_p a_p sinc(x - p)`, then compares the empirical
//! MSE of the estimator at random test points against
//! `bound_scale * error_bound + sigma_k * standard_error`.
//!
//! In [`SignalMode::Fixed`] the signal is drawn once per configuration and scaled
//! so that `|s(x)| <= A` everywhere. In [`SignalMode::Ensemble`] fresh i.i.d.
//! coefficients with `|a_p| <= A` are drawn for every noise realisation, so the
//! empirical MSE also averages over signals.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::EstimatorDesign;
use crate::ofdm::complex_gaussian;
use crate::rng::{stream_rng, Stream};
use crate::sinc::{check_distinct, sinc, DEFAULT_MIN_GAP};

/// Integer support of the test signal extends this far beyond `[0, M)`.
const SUPPORT_PAD: i64 = 4;
/// Grid density used to find `sup |s(x)|`.
const SUP_GRID_PER_UNIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalMode {
    Fixed,
    Ensemble,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckConfig {
    pub configs: usize,
    pub seed: u64,
    pub draws: usize,
    pub test_points: usize,
    pub max_abscissas: usize,
    /// Allowed excess in units of the Monte Carlo standard error.
    pub sigma_k: f64,
    /// Multiplies the bound; values below 1 exercise the failure path.
    pub bound_scale: f64,
    pub signal_mode: SignalMode,
}

impl Default for BoundCheckConfig {
    fn default() -> Self {
        Self {
            configs: 50,
            seed: 1,
            draws: 10_000,
            test_points: 10,
            max_abscissas: 12,
            sigma_k: 5.0,
            bound_scale: 1.0,
            signal_mode: SignalMode::Fixed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub x: f64,
    pub empirical_mse: f64,
    pub std_error: f64,
    pub bound: f64,
    /// `bound_scale * bound + sigma_k * std_error - empirical_mse`; negative fails.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigReport {
    pub index: usize,
    pub abscissas: Vec<f64>,
    pub noise_variance: f64,
    pub amplitude_bound: f64,
    pub points: Vec<PointReport>,
}

impl ConfigReport {
    pub fn pass(&self) -> bool {
        self.points.iter().all(|p| p.pass)
    }

    pub fn worst_margin(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.margin)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn run_bound_check(cfg: &BoundCheckConfig) -> Result<Vec<ConfigReport>> {
    if cfg.max_abscissas < 2 {
        return Err(Error::param("max_abscissas", "must be at least 2"));
    }
    if cfg.draws < 2 || cfg.test_points == 0 {
        return Err(Error::param(
            "draws",
            "need at least 2 draws and 1 test point",
        ));
    }
    if !(cfg.bound_scale > 0.0 && cfg.sigma_k >= 0.0) {
        return Err(Error::param("bound_scale", "must be > 0 with sigma_k >= 0"));
    }
    (0..cfg.configs)
        .into_par_iter()
        .map(|i| check_one(cfg, i))
        .collect()
}

fn disk_sample<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Complex64 {
    let r = radius * rng.random::<f64>().sqrt();
    Complex64::from_polar(r, 2.0 * PI * rng.random::<f64>())
}

fn series_value(coeffs: &[Complex64], first: i64, x: f64) -> Complex64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(k, a)| a * sinc(x - (first + k as i64) as f64))
        .sum()
}

fn check_one(cfg: &BoundCheckConfig, index: usize) -> Result<ConfigReport> {
    let mut rng = stream_rng(cfg.seed, Stream::BoundCheck(index as u64));
    let m = rng.random_range(2..=cfg.max_abscissas);
    let span = m as f64;
    let abscissas = loop {
        let xs: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * span).collect();
        if check_distinct(&xs, DEFAULT_MIN_GAP).is_ok() {
            break xs;
        }
    };
    let amplitude = rng.random_range(0.5..2.0);
    let noise_variance = amplitude * amplitude * 10f64.powf(rng.random_range(-3.0..-1.0));
    let mu = noise_variance / (amplitude * amplitude);
    let design = EstimatorDesign::new(&abscissas, mu)?;

    let first = -SUPPORT_PAD;
    let n_coeffs = (m as i64 + 2 * SUPPORT_PAD + 1) as usize;
    let mut coeffs: Vec<Complex64> = (0..n_coeffs)
        .map(|_| disk_sample(&mut rng, amplitude))
        .collect();
    if cfg.signal_mode == SignalMode::Fixed {
        let lo = first as f64 - 8.0;
        let hi = (first + n_coeffs as i64) as f64 + 8.0;
        let steps = ((hi - lo) * SUP_GRID_PER_UNIT as f64) as usize;
        let sup = (0..=steps)
            .map(|k| series_value(&coeffs, first, lo + k as f64 / SUP_GRID_PER_UNIT as f64).norm())
            .fold(0.0, f64::max);
        if sup > amplitude {
            let scale = amplitude / sup;
            coeffs.iter_mut().for_each(|a| *a *= scale);
        }
    }

    let test_xs: Vec<f64> = (0..cfg.test_points)
        .map(|_| rng.random::<f64>() * span)
        .collect();
    let points = test_xs
        .into_iter()
        .map(|x| {
            let c = design.coefficients(x);
            let bound = design.error_bound(amplitude, x);
            // Kernel rows for the test point and the abscissas, reused by every draw.
            let kernel = |t: f64| -> Vec<f64> {
                (0..n_coeffs)
                    .map(|k| sinc(t - (first + k as i64) as f64))
                    .collect()
            };
            let k_x = kernel(x);
            let k_m: Vec<Vec<f64>> = abscissas.iter().map(|&xm| kernel(xm)).collect();
            // Residual kernel r_p = sinc(x - p) - sum_m c_m sinc(x_m - p).
            let residual: Vec<f64> = (0..n_coeffs)
                .map(|p| k_x[p] - (0..m).map(|j| c[j] * k_m[j][p]).sum::<f64>())
                .collect();

            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..cfg.draws {
                if cfg.signal_mode == SignalMode::Ensemble {
                    coeffs
                        .iter_mut()
                        .for_each(|a| *a = disk_sample(&mut rng, amplitude));
                }
                let bias: Complex64 = coeffs.iter().zip(&residual).map(|(a, r)| a * r).sum();
                let noise: Complex64 = c
                    .iter()
                    .map(|&cm| complex_gaussian(&mut rng, noise_variance) * cm)
                    .sum();
                let e = (bias - noise).norm_sqr();
                s1 += e;
                s2 += e * e;
            }
            let n = cfg.draws as f64;
            let empirical_mse = s1 / n;
            let var = ((s2 - n * empirical_mse * empirical_mse) / (n - 1.0)).max(0.0);
            let std_error = (var / n).sqrt();
            let margin = cfg.bound_scale * bound + cfg.sigma_k * std_error - empirical_mse;
            PointReport {
                x,
                empirical_mse,
                std_error,
                bound,
                margin,
                pass: margin >= 0.0,
            }
        })
        .collect();

    Ok(ConfigReport {
        index,
        abscissas,
        noise_variance,
        amplitude_bound: amplitude,
        points,
    })
}
