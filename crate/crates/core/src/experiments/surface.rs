//! Deterministic delay/frequency map of the RMS reduction of PE relative to ML for
//! single-impulse channels `h(t) = delta(t - tau)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{db, ExperimentConfig, WeightTable};
use crate::channel::SparseChannel;
use crate::error::{Error, Result};
use crate::ofdm::SincSpectrumEstimator;
use crate::tdl::{sweep_tap_count, TdlEstimator, TdlModelSpec};

/// Sign convention written next to every surface.
pub const SIGN_CONVENTION: &str =
    "reduction_db = 10*log10(MSE_PE / MSE_ML); negative means PE is better";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsSurface {
    pub taus: Vec<f64>,
    pub frequencies: Vec<f64>,
    /// `reduction_db[i][j]` for `taus[i]`, `frequencies[j]`.
    pub reduction_db: Vec<Vec<f64>>,
    pub ml_model: TdlModelSpec,
}

impl RmsSurface {
    /// Median reduction over the central `fraction` of the grid in both directions.
    pub fn interior_median(&self, fraction: f64) -> f64 {
        let rows = central_range(self.taus.len(), fraction);
        let cols = central_range(self.frequencies.len(), fraction);
        let mut values: Vec<f64> = self.reduction_db[rows]
            .iter()
            .flat_map(|row| row[cols.clone()].iter().copied())
            .collect();
        median(&mut values)
    }

    pub fn median(&self) -> f64 {
        let mut values: Vec<f64> = self.reduction_db.iter().flatten().copied().collect();
        median(&mut values)
    }
}

fn central_range(n: usize, fraction: f64) -> std::ops::Range<usize> {
    let skip = ((1.0 - fraction) / 2.0 * n as f64).round() as usize;
    let skip = skip.min(n.saturating_sub(1) / 2);
    skip..n - skip
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// `n` uniformly spaced interior points of `]0, T_h[`.
pub fn default_tau_grid(delay_spread: f64, n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| delay_spread * i as f64 / (n + 1) as f64)
        .collect()
}

pub fn run_delay_frequency_surface(
    config: &ExperimentConfig,
    taus: &[f64],
    freqs: &[f64],
) -> Result<RmsSurface> {
    config.validate()?;
    let delay_spread = config.delay_spread()?;
    if let Some(t) = taus.iter().find(|&&t| !(t > 0.0 && t < delay_spread)) {
        return Err(Error::param(
            "tau grid",
            format!("delay {t} lies outside ]0, {delay_spread}["),
        ));
    }
    if taus.is_empty() || freqs.is_empty() {
        return Err(Error::param(
            "grid",
            "delay and frequency grids must be non-empty",
        ));
    }
    if freqs.iter().any(|f| !f.is_finite()) {
        return Err(Error::param("frequency grid", "entries must be finite"));
    }
    let grid = config.pilot_grid()?;
    let pilot_freqs = grid.frequencies();
    let noise_variance = config.noise_variance();

    let pe = SincSpectrumEstimator::new(grid, delay_spread, config.mu())?;
    let pe_table = WeightTable::sinc(&pe, freqs);
    let ml_tables: Vec<(TdlModelSpec, WeightTable)> = config
        .ml_candidates()
        .into_iter()
        .map(|n| {
            let spec = config.ml_spec(n)?;
            let est = TdlEstimator::new(spec, &pilot_freqs)?;
            Ok((spec, WeightTable::tdl(&est, freqs)))
        })
        .collect::<Result<_>>()?;

    // Per-delay MSE rows: PE first, then each ML candidate.
    let cells: Vec<Vec<Vec<f64>>> = taus
        .par_iter()
        .map(|&tau| {
            let ch = SparseChannel::impulse(tau, delay_spread).expect("tau validated");
            let h_eval: Vec<Complex64> = freqs.iter().map(|&f| ch.spectrum(f)).collect();
            let h_pilots: Vec<Complex64> = pilot_freqs.iter().map(|&f| ch.spectrum(f)).collect();
            std::iter::once(&pe_table)
                .chain(ml_tables.iter().map(|(_, t)| t))
                .map(|t| {
                    let mut mse = vec![0.0; freqs.len()];
                    t.accumulate_mse(&h_eval, &h_pilots, noise_variance, &mut mse);
                    mse
                })
                .collect()
        })
        .collect();

    let cell_count = (taus.len() * freqs.len()) as f64;
    let (best, _) = sweep_tap_count(0..ml_tables.len(), |k| {
        cells
            .iter()
            .map(|rows| rows[k + 1].iter().sum::<f64>())
            .sum::<f64>()
            / cell_count
    })
    .ok_or_else(|| Error::param("ml_taps", "no ML candidate"))?;

    let reduction_db = cells
        .iter()
        .map(|rows| {
            rows[0]
                .iter()
                .zip(&rows[best + 1])
                .map(|(&pe, &ml)| db(pe) - db(ml))
                .collect()
        })
        .collect();

    Ok(RmsSurface {
        taus: taus.to_vec(),
        frequencies: freqs.to_vec(),
        reduction_db,
        ml_model: ml_tables[best].0,
    })
}
