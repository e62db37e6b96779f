//! Pilot grids, noisy pilot observations and the mapping between channel-spectrum
//! estimation and the unit-band estimator.
//!
//! A channel with delays in `]0, T_h[` has a spectrum `H(f)` whose normalised form
//! `s(x) = H(x / T_h) exp(j pi x)` is band-limited to `]-1/2, 1/2[`. Pilots at
//! frequencies `f_m` become abscissas `x_m = f_m T_h` and samples
//! `z_m = V_m exp(j pi x_m)`; the rotation has unit modulus so the noise variance is
//! unchanged.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::SparseChannel;
use crate::error::{Error, Result};
use crate::estimator::{EstimatorDesign, SampleVector};

/// Pilot carrier indices and the carrier spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotGrid {
    indices: Vec<i64>,
    spacing: f64,
}

impl PilotGrid {
    pub fn new(indices: Vec<i64>, spacing: f64) -> Result<Self> {
        if indices.len() < 2 {
            return Err(Error::param(
                "pilot indices",
                "at least two pilots are required",
            ));
        }
        if indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("pilot indices", "must be strictly increasing"));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::param("frequency spacing", "must be finite and > 0"));
        }
        Ok(Self { indices, spacing })
    }

    /// `count` pilots at indices `first + step * m`.
    pub fn uniform(first: i64, step: i64, count: usize, spacing: f64) -> Result<Self> {
        Self::new(
            (0..count as i64).map(|m| first + step * m).collect(),
            spacing,
        )
    }

    pub fn indices(&self) -> &[i64] {
        &self.indices
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.indices
            .iter()
            .map(|&i| i as f64 * self.spacing)
            .collect()
    }

    /// `(i_{M-1} - i_0) / (M - 1) * delta_f`.
    pub fn average_bandwidth(&self) -> f64 {
        let span = (self.indices[self.len() - 1] - self.indices[0]) as f64;
        span / (self.len() - 1) as f64 * self.spacing
    }
}

/// `V_m = H(f_m) + E_m` at each pilot.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservations {
    pub grid: PilotGrid,
    pub values: Vec<Complex64>,
    pub noise_variance: f64,
}

impl PilotObservations {
    pub fn new(grid: PilotGrid, values: Vec<Complex64>, noise_variance: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        if !(noise_variance.is_finite() && noise_variance >= 0.0) {
            return Err(Error::param("noise_variance", "must be finite and >= 0"));
        }
        Ok(Self {
            grid,
            values,
            noise_variance,
        })
    }
}

/// Circular complex Gaussian sample with total variance `variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

pub fn observe_pilots<R: Rng + ?Sized>(
    channel: &SparseChannel,
    grid: &PilotGrid,
    noise_variance: f64,
    rng: &mut R,
) -> Result<PilotObservations> {
    if !(noise_variance.is_finite() && noise_variance >= 0.0) {
        return Err(Error::param("noise_variance", "must be finite and >= 0"));
    }
    let values = grid
        .frequencies()
        .into_iter()
        .map(|f| {
            let h = channel.spectrum(f);
            if noise_variance > 0.0 {
                h + complex_gaussian(rng, noise_variance)
            } else {
                h
            }
        })
        .collect();
    PilotObservations::new(grid.clone(), values, noise_variance)
}

/// Pilot observations mapped onto the unit-band problem.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSamples {
    pub abscissas: Vec<f64>,
    pub values: Vec<Complex64>,
    pub noise_variance: f64,
}

impl NormalizedSamples {
    pub fn into_sample_vector(self, amplitude_bound: f64) -> Result<SampleVector> {
        SampleVector::new(self.values, self.noise_variance, amplitude_bound)
    }
}

/// `x_m = f_m T_h`, `z_m = V_m exp(j pi x_m)`.
pub fn normalize_to_unit_band(
    obs: &PilotObservations,
    delay_spread: f64,
) -> Result<NormalizedSamples> {
    check_delay_spread(delay_spread)?;
    let abscissas: Vec<f64> = obs
        .grid
        .frequencies()
        .into_iter()
        .map(|f| f * delay_spread)
        .collect();
    let values = abscissas
        .iter()
        .zip(&obs.values)
        .map(|(&x, &v)| v * Complex64::from_polar(1.0, PI * x))
        .collect();
    Ok(NormalizedSamples {
        abscissas,
        values,
        noise_variance: obs.noise_variance,
    })
}

/// `H_hat(f) = s_hat(f T_h) exp(-j pi f T_h)`.
pub fn denormalize_estimate(s_hat: Complex64, f: f64, delay_spread: f64) -> Complex64 {
    s_hat * Complex64::from_polar(1.0, -PI * f * delay_spread)
}

fn check_delay_spread(delay_spread: f64) -> Result<()> {
    if !(delay_spread.is_finite() && delay_spread > 0.0) {
        return Err(Error::param("delay_spread", "must be finite and > 0"));
    }
    Ok(())
}

/// The sinc estimator applied to channel spectra: pilot grid, delay-spread bound and
/// the unit-band design built on the normalised pilot abscissas.
#[derive(Debug, Clone)]
pub struct SincSpectrumEstimator {
    grid: PilotGrid,
    delay_spread: f64,
    design: EstimatorDesign,
}

impl SincSpectrumEstimator {
    /// `mu = sigma_E^2 / A^2`; `mu = 0` gives the noise-blind interpolating variant.
    pub fn new(grid: PilotGrid, delay_spread: f64, mu: f64) -> Result<Self> {
        check_delay_spread(delay_spread)?;
        let abscissas: Vec<f64> = grid
            .frequencies()
            .into_iter()
            .map(|f| f * delay_spread)
            .collect();
        let design = EstimatorDesign::new(&abscissas, mu)?;
        Ok(Self {
            grid,
            delay_spread,
            design,
        })
    }

    pub fn design(&self) -> &EstimatorDesign {
        &self.design
    }

    pub fn grid(&self) -> &PilotGrid {
        &self.grid
    }

    pub fn delay_spread(&self) -> f64 {
        self.delay_spread
    }

    /// Complex weights `w_m(f)` with `H_hat(f) = sum_m w_m(f) V_m`, i.e.
    /// `w_m(f) = c_m(f T_h) exp(-j pi (f T_h - x_m))`.
    pub fn weights(&self, f: f64) -> Vec<Complex64> {
        let x = f * self.delay_spread;
        let c = self.design.coefficients(x);
        self.design
            .abscissas()
            .iter()
            .zip(c.iter())
            .map(|(&xm, &cm)| Complex64::from_polar(cm, -PI * (x - xm)))
            .collect()
    }

    pub fn estimate(&self, obs: &PilotObservations, f: f64) -> Result<Complex64> {
        if obs.grid != self.grid {
            return Err(Error::param(
                "observations",
                "pilot grid differs from the estimator's",
            ));
        }
        let samples = normalize_to_unit_band(obs, self.delay_spread)?;
        let sv = SampleVector {
            values: samples.values,
            noise_variance: samples.noise_variance,
            amplitude_bound: 1.0,
        };
        let x = f * self.delay_spread;
        Ok(denormalize_estimate(
            self.design.estimate(&sv, x)?,
            f,
            self.delay_spread,
        ))
    }

    /// Squared-error bound on `H_hat(f)` for channels with `|H| <= A`.
    pub fn error_bound(&self, amplitude_bound: f64, f: f64) -> f64 {
        self.design
            .error_bound(amplitude_bound, f * self.delay_spread)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelModelParams, Tap};
    use crate::rng::{stream_rng, Stream};
    use approx::assert_relative_eq;

    fn grid() -> PilotGrid {
        PilotGrid::uniform(0, 16, 28, 1.0).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(PilotGrid::new(vec![0], 1.0).is_err());
        assert!(PilotGrid::new(vec![0, 0], 1.0).is_err());
        assert!(PilotGrid::new(vec![3, 1], 1.0).is_err());
        assert!(PilotGrid::new(vec![0, 1], 0.0).is_err());
        assert_eq!(grid().average_bandwidth(), 16.0);
        assert_eq!(
            PilotGrid::new(vec![0, 10], 2.0)
                .unwrap()
                .average_bandwidth(),
            20.0
        );
    }

    #[test]
    fn noiseless_observation_is_exact() {
        let ch = SparseChannel::impulse(0.004, 1.0 / 64.0).unwrap();
        let obs = observe_pilots(&ch, &grid(), 0.0, &mut stream_rng(1, Stream::Noise(0))).unwrap();
        for (v, f) in obs.values.iter().zip(grid().frequencies()) {
            assert_eq!(*v, ch.spectrum(f));
        }
    }

    #[test]
    fn noise_variance_and_circularity() {
        let ch = SparseChannel::impulse(0.004, 1.0 / 64.0).unwrap();
        let g = PilotGrid::new(vec![16, 32], 1.0).unwrap();
        let mut rng = stream_rng(2, Stream::Noise(0));
        let var = 1e-3;
        let n = 100_000;
        let h = ch.spectrum(16.0);
        let (mut s_re, mut s_im, mut s_cross) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let obs = observe_pilots(&ch, &g, var, &mut rng).unwrap();
            let e = obs.values[0] - h;
            s_re += e.re * e.re;
            s_im += e.im * e.im;
            s_cross += e.re * e.im;
        }
        let n = n as f64;
        assert!(((s_re + s_im) / n / var - 1.0).abs() < 0.02);
        assert!((s_re / n / (var / 2.0) - 1.0).abs() < 0.03);
        assert!((s_cross / n).abs() < 0.03 * var / 2.0);
    }

    #[test]
    fn normalization_examples() {
        let g = PilotGrid::new(vec![0, 1], 1.0).unwrap();
        let v = vec![Complex64::new(0.3, -0.2), Complex64::new(1.0, 0.0)];
        let obs = PilotObservations::new(g, v.clone(), 0.1).unwrap();
        let ns = normalize_to_unit_band(&obs, 1.0).unwrap();
        assert_eq!(ns.abscissas, vec![0.0, 1.0]);
        assert_eq!(ns.values[0], v[0]);
        assert_relative_eq!(ns.values[1].re, -1.0, epsilon = 1e-15);
        assert_relative_eq!(ns.values[1].im, 0.0, epsilon = 1e-15);
        assert_eq!(ns.noise_variance, 0.1);
    }

    #[test]
    fn mid_delay_tap_normalizes_to_constant() {
        let th = 0.02;
        let ch = SparseChannel::impulse(th / 2.0, th).unwrap();
        let g = PilotGrid::uniform(0, 3, 10, 1.0).unwrap();
        let obs = observe_pilots(&ch, &g, 0.0, &mut stream_rng(0, Stream::Noise(0))).unwrap();
        let ns = normalize_to_unit_band(&obs, th).unwrap();
        for z in ns.values {
            assert_relative_eq!(z.re, 1.0, epsilon = 1e-13);
            assert_relative_eq!(z.im, 0.0, epsilon = 1e-13);
        }
        assert_eq!(ch.normalized_frequencies(), vec![0.0]);
    }

    #[test]
    fn denormalize_examples() {
        let c = Complex64::new(0.4, 0.9);
        assert_eq!(denormalize_estimate(c, 0.0, 3.0), c);
        let h = denormalize_estimate(Complex64::new(1.0, 0.0), 1.0, 1.0);
        assert_relative_eq!(h.re, -1.0, epsilon = 1e-15);
        assert_relative_eq!(h.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn normalize_denormalize_round_trip() {
        let th = 1.0 / 64.0;
        let ch = SparseChannel::new(
            vec![Tap {
                delay: 0.0037,
                amplitude: Complex64::new(0.6, -1.1),
            }],
            th,
        )
        .unwrap();
        let freqs: Vec<i64> = (0..20).map(|i| 7 * i + 3).collect();
        let g = PilotGrid::new(freqs, 1.0).unwrap();
        let obs = observe_pilots(&ch, &g, 0.0, &mut stream_rng(0, Stream::Noise(0))).unwrap();
        let ns = normalize_to_unit_band(&obs, th).unwrap();
        let mut worst: f64 = 0.0;
        for ((&x, &z), f) in ns.abscissas.iter().zip(&ns.values).zip(g.frequencies()) {
            let back = denormalize_estimate(z, x / th, th);
            worst = worst.max((back - ch.spectrum(f)).norm());
        }
        assert!(worst < 1e-12);
    }

    #[test]
    fn weights_reproduce_estimate() {
        let th = 0.25 / 16.0;
        let p = ChannelModelParams::unit_power(9.0, th, 4).unwrap();
        let ch = p.draw(&mut stream_rng(4, Stream::Channel(0)));
        let obs = observe_pilots(&ch, &grid(), 1e-3, &mut stream_rng(4, Stream::Noise(0))).unwrap();
        let est = SincSpectrumEstimator::new(grid(), th, 1e-3).unwrap();
        for &f in &[0.0, 7.0, 100.5, 432.0] {
            let direct = est.estimate(&obs, f).unwrap();
            let via_weights: Complex64 = est
                .weights(f)
                .iter()
                .zip(&obs.values)
                .map(|(w, v)| w * v)
                .sum();
            assert_relative_eq!((direct - via_weights).norm(), 0.0, epsilon = 1e-12);
        }
    }
}
