//! Monte Carlo RMS-versus-frequency curves for the ML, PE and PEInf estimators.
//!
//! Every trial draws one channel; the noise contribution is added analytically, so
//! each trial contributes the exact conditional MSE of every estimator at every
//! evaluation carrier. Trials are reduced in fixed-size chunks in trial order, so
//! results do not depend on the number of worker threads.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{db, CompensatedSum, Estimator, ExperimentConfig, WeightTable};
use crate::channel::{ChannelModelParams, SparseChannel};
use crate::error::Result;
use crate::ofdm::SincSpectrumEstimator;
use crate::rng::{stream_rng, Stream};
use crate::tdl::{sweep_tap_count, TdlEstimator, TdlModelSpec};

const CHUNK: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n_taps: usize,
    pub first_tap: i64,
    /// RMS over all evaluation carriers and trials, in dB.
    pub rms_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsCurve {
    pub carrier_indices: Vec<i64>,
    pub frequencies: Vec<f64>,
    /// Linear RMS per estimator and carrier.
    pub rms: BTreeMap<Estimator, Vec<f64>>,
    /// Monte Carlo standard error of the mean MSE per estimator and carrier.
    pub mse_std_error: BTreeMap<Estimator, Vec<f64>>,
    /// PE's squared-error bound per carrier, for `|H| <= amplitude_bound`.
    pub pe_bound: Vec<f64>,
    pub ml_model: Option<TdlModelSpec>,
    pub ml_sweep: Vec<SweepPoint>,
    /// Ridge actually used by PEInf (non-zero after the singular-Gram fallback).
    pub peinf_ridge: Option<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl RmsCurve {
    pub fn rms_db(&self, e: Estimator) -> Option<Vec<f64>> {
        self.rms
            .get(&e)
            .map(|r| r.iter().map(|v| db(v * v)).collect())
    }

    /// Mean over carriers of the RMS in dB.
    pub fn mean_db(&self, e: Estimator) -> Option<f64> {
        self.rms_db(e).map(|v| mean(&v))
    }

    /// Mean over carriers of `RMS_baseline[dB] - RMS_candidate[dB]`.
    pub fn mean_improvement_db(&self, candidate: Estimator, baseline: Estimator) -> Option<f64> {
        let c = self.rms_db(candidate)?;
        let b = self.rms_db(baseline)?;
        Some(mean(
            &b.iter().zip(&c).map(|(b, c)| b - c).collect::<Vec<_>>(),
        ))
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Channel used by trial `trial`.
pub(crate) fn trial_channel(params: &ChannelModelParams, trial: u64) -> SparseChannel {
    params.draw(&mut stream_rng(params.seed, Stream::Channel(trial)))
}

/// Every channel realisation `run_rms_curves` would use for `config`, indexed by trial.
pub fn trial_channels(config: &ExperimentConfig) -> Result<Vec<(u64, SparseChannel)>> {
    config.validate()?;
    let params =
        ChannelModelParams::unit_power(config.lambda, config.delay_spread()?, config.seed)?;
    Ok((0..config.trials as u64)
        .map(|t| (t, trial_channel(&params, t)))
        .collect())
}

struct Tables {
    estimators: Vec<(Estimator, WeightTable)>,
    ml: Vec<(TdlModelSpec, WeightTable)>,
}

#[derive(Clone)]
struct Sums {
    /// `tables.estimators.len() + tables.ml.len()` rows of per-carrier sums.
    mse: Vec<Vec<f64>>,
    mse_sq: Vec<Vec<f64>>,
}

impl Sums {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            mse: vec![vec![0.0; cols]; rows],
            mse_sq: vec![vec![0.0; cols]; rows],
        }
    }
}

pub fn run_rms_curves(config: &ExperimentConfig) -> Result<RmsCurve> {
    config.validate()?;
    let grid = config.pilot_grid()?;
    let pilot_freqs = grid.frequencies();
    let delay_spread = config.delay_spread()?;
    let noise_variance = config.noise_variance();
    let carriers = config.evaluation_carriers();
    let freqs: Vec<f64> = carriers
        .iter()
        .map(|&i| i as f64 * config.carrier_spacing)
        .collect();

    let mut estimators = Vec::new();
    let mut pe_bound = Vec::new();
    let mut peinf_ridge = None;
    if config.includes(Estimator::Pe) {
        let pe = SincSpectrumEstimator::new(grid.clone(), delay_spread, config.mu())?;
        pe_bound = freqs
            .iter()
            .map(|&f| pe.error_bound(config.amplitude_bound, f))
            .collect();
        estimators.push((Estimator::Pe, WeightTable::sinc(&pe, &freqs)));
    }
    if config.includes(Estimator::PeInf) {
        let pe_inf = SincSpectrumEstimator::new(grid.clone(), delay_spread, 0.0)?;
        peinf_ridge = Some(pe_inf.design().effective_ridge());
        estimators.push((Estimator::PeInf, WeightTable::sinc(&pe_inf, &freqs)));
    }
    let mut ml = Vec::new();
    if config.includes(Estimator::Ml) {
        for n in config.ml_candidates() {
            let spec = config.ml_spec(n)?;
            let est = TdlEstimator::new(spec, &pilot_freqs)?;
            ml.push((spec, WeightTable::tdl(&est, &freqs)));
        }
    }
    let tables = Tables { estimators, ml };
    let rows = tables.estimators.len() + tables.ml.len();
    let params = ChannelModelParams::unit_power(config.lambda, delay_spread, config.seed)?;

    let n_chunks = config.trials.div_ceil(CHUNK);
    let chunk_sums: Vec<Sums> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut sums = Sums::zeros(rows, freqs.len());
            let mut scratch = vec![0.0; freqs.len()];
            let end = ((c + 1) * CHUNK).min(config.trials);
            for trial in c * CHUNK..end {
                let ch = trial_channel(&params, trial as u64);
                let h_eval: Vec<Complex64> = freqs.iter().map(|&f| ch.spectrum(f)).collect();
                let h_pilots: Vec<Complex64> =
                    pilot_freqs.iter().map(|&f| ch.spectrum(f)).collect();
                let all = tables
                    .estimators
                    .iter()
                    .map(|(_, t)| t)
                    .chain(tables.ml.iter().map(|(_, t)| t));
                for (row, table) in all.enumerate() {
                    scratch.iter_mut().for_each(|v| *v = 0.0);
                    table.accumulate_mse(&h_eval, &h_pilots, noise_variance, &mut scratch);
                    for (i, &v) in scratch.iter().enumerate() {
                        sums.mse[row][i] += v;
                        sums.mse_sq[row][i] += v * v;
                    }
                }
            }
            sums
        })
        .collect();

    let trials = config.trials as f64;
    let mut mean_mse = vec![vec![0.0; freqs.len()]; rows];
    let mut std_err = vec![vec![0.0; freqs.len()]; rows];
    for row in 0..rows {
        for i in 0..freqs.len() {
            let mut s = CompensatedSum::default();
            let mut s2 = CompensatedSum::default();
            for chunk in &chunk_sums {
                s.add(chunk.mse[row][i]);
                s2.add(chunk.mse_sq[row][i]);
            }
            let m = s.value() / trials;
            let var = if config.trials > 1 {
                ((s2.value() - trials * m * m) / (trials - 1.0)).max(0.0)
            } else {
                0.0
            };
            mean_mse[row][i] = m;
            std_err[row][i] = (var / trials).sqrt();
        }
    }

    let mut rms = BTreeMap::new();
    let mut mse_std_error = BTreeMap::new();
    for (row, (e, _)) in tables.estimators.iter().enumerate() {
        rms.insert(*e, mean_mse[row].iter().map(|v| v.sqrt()).collect());
        mse_std_error.insert(*e, std_err[row].clone());
    }

    let offset = tables.estimators.len();
    let aggregate = |k: usize| mean(&mean_mse[offset + k]);
    let ml_sweep: Vec<SweepPoint> = tables
        .ml
        .iter()
        .enumerate()
        .map(|(k, (spec, _))| SweepPoint {
            n_taps: spec.n_taps,
            first_tap: spec.first_tap,
            rms_db: db(aggregate(k)),
        })
        .collect();
    let mut ml_model = None;
    if let Some((best, _)) = sweep_tap_count(0..tables.ml.len(), aggregate) {
        let row = offset + best;
        rms.insert(
            Estimator::Ml,
            mean_mse[row].iter().map(|v| v.sqrt()).collect(),
        );
        mse_std_error.insert(Estimator::Ml, std_err[row].clone());
        ml_model = Some(tables.ml[best].0);
    }

    Ok(RmsCurve {
        carrier_indices: carriers,
        frequencies: freqs,
        rms,
        mse_std_error,
        pe_bound,
        ml_model,
        ml_sweep,
        peinf_ridge,
        trials: config.trials,
        seed: config.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::analytic_linear_mse;

    fn small(trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            trials,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn curve_matches_direct_per_trial_computation() {
        let cfg = ExperimentConfig {
            ml_taps: Some(12),
            ..small(3)
        };
        let curve = run_rms_curves(&cfg).unwrap();
        let grid = cfg.pilot_grid().unwrap();
        let th = cfg.delay_spread().unwrap();
        let pe = SincSpectrumEstimator::new(grid.clone(), th, cfg.mu()).unwrap();
        let params = ChannelModelParams::unit_power(cfg.lambda, th, cfg.seed).unwrap();
        let pf = grid.frequencies();
        for &i in &[0usize, 17, 200, 432] {
            let f = curve.frequencies[i];
            let mut acc = 0.0;
            for t in 0..3 {
                let ch = trial_channel(&params, t);
                let hp: Vec<Complex64> = pf.iter().map(|&x| ch.spectrum(x)).collect();
                acc +=
                    analytic_linear_mse(&pe.weights(f), ch.spectrum(f), &hp, cfg.noise_variance());
            }
            let expected = (acc / 3.0).sqrt();
            let got = curve.rms[&Estimator::Pe][i];
            assert!(
                (got - expected).abs() < 1e-12 * expected,
                "{got} vs {expected}"
            );
        }
        assert_eq!(curve.ml_model.unwrap().n_taps, 12);
        assert_eq!(curve.ml_sweep.len(), 1);
    }

    #[test]
    fn prefix_trials_are_stable() {
        let cfg = |trials| ExperimentConfig {
            ml_taps: Some(10),
            ..small(trials)
        };
        let short = run_rms_curves(&cfg(30)).unwrap();
        let long = run_rms_curves(&cfg(70)).unwrap();
        let grid = cfg(1).pilot_grid().unwrap();
        let th = cfg(1).delay_spread().unwrap();
        let pe = SincSpectrumEstimator::new(grid.clone(), th, cfg(1).mu()).unwrap();
        let params = ChannelModelParams::unit_power(9.0, th, 1).unwrap();
        let pf = grid.frequencies();
        let i = 123;
        let f = short.frequencies[i];
        let per_trial: Vec<f64> = (0..70)
            .map(|t| {
                let ch = trial_channel(&params, t);
                let hp: Vec<Complex64> = pf.iter().map(|&x| ch.spectrum(x)).collect();
                analytic_linear_mse(&pe.weights(f), ch.spectrum(f), &hp, 1e-3)
            })
            .collect();
        let first30 = per_trial[..30].iter().sum::<f64>() / 30.0;
        let all70 = per_trial.iter().sum::<f64>() / 70.0;
        let got30 = short.rms[&Estimator::Pe][i].powi(2);
        let got70 = long.rms[&Estimator::Pe][i].powi(2);
        assert!((got30 - first30).abs() < 1e-12 * first30);
        assert!((got70 - all70).abs() < 1e-12 * all70);
        assert_eq!(short, run_rms_curves(&cfg(30)).unwrap());
    }

    #[test]
    fn selected_estimators_only() {
        let cfg = ExperimentConfig {
            estimators: vec![Estimator::Pe],
            ..small(2)
        };
        let curve = run_rms_curves(&cfg).unwrap();
        assert!(curve.rms.contains_key(&Estimator::Pe));
        assert!(!curve.rms.contains_key(&Estimator::Ml));
        assert!(curve.ml_model.is_none());
        assert!(curve.peinf_ridge.is_none());
    }
}
