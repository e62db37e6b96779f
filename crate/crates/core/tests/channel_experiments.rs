use num_complex::Complex64;
use proptest::prelude::*;

use nusest::channel::calibrate_sigma_a;
use nusest::experiments::{analytic_linear_mse, run_rms_curves, Estimator, ExperimentConfig};
use nusest::ofdm::{normalize_to_unit_band, observe_pilots};
use nusest::rng::{stream_rng, Stream};
use nusest::tdl::TdlEstimator;
use nusest::{ChannelModelParams, PilotGrid, PilotObservations, SincSpectrumEstimator};

const DRAWS: u64 = 100_000;

fn mean_power(params: &ChannelModelParams, freqs: &[f64]) -> Vec<f64> {
    let mut rng = stream_rng(params.seed, Stream::Channel(0));
    let mut acc = vec![0.0; freqs.len()];
    for _ in 0..DRAWS {
        let ch = params.draw(&mut rng);
        for (a, &f) in acc.iter_mut().zip(freqs) {
            *a += ch.spectrum(f).norm_sqr();
        }
    }
    acc.iter().map(|a| a / DRAWS as f64).collect()
}

#[test]
fn calibrated_channels_have_unit_power_at_every_frequency() {
    let th = 0.25 / 16.0;
    let sigma_a2 = calibrate_sigma_a(9.0, 1.0).unwrap();
    let params = ChannelModelParams {
        lambda: 9.0,
        delay_spread: th,
        tap_variance: sigma_a2,
        seed: 7,
    };
    let freqs = [0.0, 17.3, 101.0, 250.5, 432.0];
    let power = mean_power(&params, &freqs);
    for p in &power {
        assert!((0.99..=1.01).contains(p), "E|H|^2 = {p}");
    }
    // Flatness: per-draw |H|^2 has unit mean and O(1) spread, so the Monte Carlo
    // error of each mean is a few 1e-3.
    let spread = power.iter().cloned().fold(f64::MIN, f64::max)
        - power.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 0.02, "spread {spread}");
}

#[test]
fn delays_map_inside_the_unit_band() {
    let params = ChannelModelParams::unit_power(9.0, 1.0 / 64.0, 3).unwrap();
    let mut rng = stream_rng(3, Stream::Channel(0));
    for _ in 0..2000 {
        for nu in params.draw(&mut rng).normalized_frequencies() {
            assert!(nu > -0.5 && nu < 0.5, "{nu}");
        }
    }
}

#[test]
fn rotation_preserves_noise_statistics() {
    let grid = PilotGrid::uniform(0, 16, 28, 1.0).unwrap();
    let th = 0.25 / 16.0;
    let sigma2 = 0.5;
    let zero = nusest::SparseChannel::new(
        vec![nusest::Tap {
            delay: th / 2.0,
            amplitude: Complex64::new(0.0, 0.0),
        }],
        th,
    )
    .unwrap();
    let mut rng = stream_rng(11, Stream::Noise(0));
    let n = 20_000;
    let (mut rr, mut ii, mut ri, mut pseudo) = (0.0, 0.0, 0.0, Complex64::new(0.0, 0.0));
    for _ in 0..n {
        let obs = observe_pilots(&zero, &grid, sigma2, &mut rng).unwrap();
        let z = normalize_to_unit_band(&obs, th).unwrap();
        for v in &z.values {
            rr += v.re * v.re;
            ii += v.im * v.im;
            ri += v.re * v.im;
            pseudo += v * v;
        }
    }
    let count = (n * grid.len()) as f64;
    // Standard error of each second moment is about sigma2/2 * sqrt(2/count).
    let tol = 5.0 * sigma2 * (2.0 / count).sqrt();
    assert!((rr / count - sigma2 / 2.0).abs() < tol);
    assert!((ii / count - sigma2 / 2.0).abs() < tol);
    assert!((ri / count).abs() < tol);
    assert!((pseudo / count).norm() < 2.0 * tol);
}

#[test]
fn pe_weights_approach_peinf_at_high_snr() {
    // 120 dB on a grid where G itself is well conditioned.
    let grid = PilotGrid::uniform(0, 16, 28, 1.0).unwrap();
    let th = 1.0 / 16.0;
    let mu = 1e-12;
    let pe = SincSpectrumEstimator::new(grid.clone(), th, mu).unwrap();
    let pe_inf = SincSpectrumEstimator::new(grid, th, 0.0).unwrap();
    assert!(!pe_inf.design().used_fallback());
    for f in [0.0, 3.3, 100.0, 431.5] {
        let diff = pe
            .weights(f)
            .iter()
            .zip(pe_inf.weights(f))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-6, "f={f}: {diff}");
    }
}

#[test]
fn analytic_mse_matches_simulated_noise() {
    let cfg = ExperimentConfig::default();
    let th = cfg.delay_spread().unwrap();
    let grid = cfg.pilot_grid().unwrap();
    let pilots = grid.frequencies();
    let sigma2 = cfg.noise_variance();
    let pe = SincSpectrumEstimator::new(grid.clone(), th, cfg.mu()).unwrap();
    let params = ChannelModelParams::unit_power(9.0, th, 5).unwrap();
    let ch = params.draw(&mut stream_rng(5, Stream::Channel(0)));
    let f = 123.4;
    let w = pe.weights(f);
    let hp: Vec<Complex64> = pilots.iter().map(|&p| ch.spectrum(p)).collect();
    let analytic = analytic_linear_mse(&w, ch.spectrum(f), &hp, sigma2);

    let mut rng = stream_rng(5, Stream::Noise(0));
    let n = 40_000;
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let obs = observe_pilots(&ch, &grid, sigma2, &mut rng).unwrap();
        let e = (pe.estimate(&obs, f).unwrap() - ch.spectrum(f)).norm_sqr();
        s1 += e;
        s2 += e * e;
    }
    let mean = s1 / n as f64;
    let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
    assert!(
        (mean - analytic).abs() < 5.0 * se,
        "{mean} vs {analytic} (se {se})"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mse_never_drops_below_the_noise_term(
        alpha in 0.05f64..1.0,
        seed in any::<u64>(),
        f in 0.0f64..432.0,
        n_taps in 1usize..=28,
    ) {
        let cfg = ExperimentConfig { alpha, ..ExperimentConfig::default() };
        let th = cfg.delay_spread().unwrap();
        let grid = cfg.pilot_grid().unwrap();
        let pilots = grid.frequencies();
        let sigma2 = cfg.noise_variance();
        let ch = ChannelModelParams::unit_power(9.0, th, seed).unwrap()
            .draw(&mut stream_rng(seed, Stream::Channel(0)));
        let hp: Vec<Complex64> = pilots.iter().map(|&p| ch.spectrum(p)).collect();
        let pe = SincSpectrumEstimator::new(grid, th, cfg.mu()).unwrap();
        let ml = TdlEstimator::new(cfg.ml_spec(n_taps).unwrap(), &pilots).unwrap();
        for w in [pe.weights(f), ml.weights(f)] {
            let noise = sigma2 * w.iter().map(|x| x.norm_sqr()).sum::<f64>();
            let mse = analytic_linear_mse(&w, ch.spectrum(f), &hp, sigma2);
            prop_assert!(mse >= noise);
        }
    }
}

#[test]
fn pe_mse_stays_below_its_bound_on_average() {
    for alpha in [0.25, 0.125] {
        let cfg = ExperimentConfig {
            trials: 1000,
            estimators: vec![Estimator::Pe],
            ..ExperimentConfig::with_alpha(alpha)
        };
        let curve = run_rms_curves(&cfg).unwrap();
        let rms = &curve.rms[&Estimator::Pe];
        let se = &curve.mse_std_error[&Estimator::Pe];
        for i in 0..rms.len() {
            let mse = rms[i] * rms[i];
            assert!(
                mse <= curve.pe_bound[i] + 5.0 * se[i],
                "alpha {alpha} carrier {i}: {mse} > {} + 5*{}",
                curve.pe_bound[i],
                se[i]
            );
        }
    }
}

#[test]
fn observations_validate_lengths() {
    let grid = PilotGrid::uniform(0, 16, 4, 1.0).unwrap();
    assert!(PilotObservations::new(grid, vec![Complex64::new(0.0, 0.0); 3], 0.0).is_err());
}
