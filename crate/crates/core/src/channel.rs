//! Sparse multipath channels `h(t) = sum_k a_k delta(t - tau_k)` and the random
//! channel generator used by the experiments.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};

/// Relative distance from the ends of `[0, T_h]` at which a drawn delay is redrawn.
const ENDPOINT_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    /// Seconds.
    pub delay: f64,
    pub amplitude: Complex64,
}

/// Multipath channel whose delays all lie in the open interval `]0, T_h[`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseChannel {
    taps: Vec<Tap>,
    delay_spread: f64,
}

impl SparseChannel {
    pub fn new(taps: Vec<Tap>, delay_spread: f64) -> Result<Self> {
        if !(delay_spread.is_finite() && delay_spread > 0.0) {
            return Err(Error::InvalidChannel(format!(
                "delay spread {delay_spread} must be finite and positive"
            )));
        }
        if taps.is_empty() {
            return Err(Error::InvalidChannel(
                "a channel needs at least one tap".into(),
            ));
        }
        for (k, tap) in taps.iter().enumerate() {
            if !(tap.delay > 0.0 && tap.delay < delay_spread) {
                return Err(Error::InvalidChannel(format!(
                    "tap {k} delay {} outside ]0, {delay_spread}[",
                    tap.delay
                )));
            }
            if !(tap.amplitude.re.is_finite() && tap.amplitude.im.is_finite()) {
                return Err(Error::InvalidChannel(format!(
                    "tap {k} amplitude is not finite"
                )));
            }
        }
        Ok(Self { taps, delay_spread })
    }

    /// Unit impulse at `delay`.
    pub fn impulse(delay: f64, delay_spread: f64) -> Result<Self> {
        Self::new(
            vec![Tap {
                delay,
                amplitude: Complex64::new(1.0, 0.0),
            }],
            delay_spread,
        )
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn delay_spread(&self) -> f64 {
        self.delay_spread
    }

    /// `H(f) = sum_k a_k exp(-j 2 pi tau_k f)`.
    pub fn spectrum(&self, f: f64) -> Complex64 {
        self.taps
            .iter()
            .map(|t| t.amplitude * Complex64::from_polar(1.0, -2.0 * PI * t.delay * f))
            .sum()
    }

    /// Position of each tap in the spectrum of the normalised signal,
    /// `tau_k / T_h - 1/2`; always inside `]-1/2, 1/2[`.
    pub fn normalized_frequencies(&self) -> Vec<f64> {
        self.taps
            .iter()
            .map(|t| t.delay / self.delay_spread - 0.5)
            .collect()
    }
}

/// Random channel model: `K - 1 ~ Poisson(lambda)`, `a_k` circular complex Gaussian
/// with `E|a_k|^2 = sigma_a^2 exp(-2 (k-1) / K)`, delays i.i.d. uniform on `]0, T_h[`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModelParams {
    pub lambda: f64,
    pub delay_spread: f64,
    /// `sigma_a^2`, total complex variance of the first tap.
    pub tap_variance: f64,
    pub seed: u64,
}

impl ChannelModelParams {
    /// Parameters with `sigma_a^2` calibrated so that `E|H(f)|^2 = 1`.
    pub fn unit_power(lambda: f64, delay_spread: f64, seed: u64) -> Result<Self> {
        let p = Self {
            lambda,
            delay_spread,
            tap_variance: calibrate_sigma_a(lambda, 1.0)?,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::param("lambda", "must be finite and > 0"));
        }
        if !(self.delay_spread.is_finite() && self.delay_spread > 0.0) {
            return Err(Error::param("delay_spread", "must be finite and > 0"));
        }
        if !(self.tap_variance.is_finite() && self.tap_variance > 0.0) {
            return Err(Error::param("tap_variance", "must be finite and > 0"));
        }
        Ok(())
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> SparseChannel {
        let extra = Poisson::new(self.lambda)
            .expect("lambda validated positive")
            .sample(rng);
        let n_taps = extra as usize + 1;
        let k_f = n_taps as f64;
        let taps = (0..n_taps)
            .map(|k| {
                let var = self.tap_variance * (-2.0 * k as f64 / k_f).exp();
                let scale = (var / 2.0).sqrt();
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Tap {
                    delay: self.draw_delay(rng),
                    amplitude: Complex64::new(scale * re, scale * im),
                }
            })
            .collect();
        SparseChannel {
            taps,
            delay_spread: self.delay_spread,
        }
    }

    fn draw_delay<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let guard = ENDPOINT_GUARD * self.delay_spread;
        loop {
            let tau = rng.random::<f64>() * self.delay_spread;
            if tau > guard && tau < self.delay_spread - guard {
                return tau;
            }
        }
    }
}

/// `sum_{k=1}^{K} exp(-2 (k-1) / K)`, the power profile sum of a `K`-tap channel.
pub fn power_profile_sum(n_taps: usize) -> f64 {
    let k = n_taps as f64;
    (1.0 - (-2.0f64).exp()) / (1.0 - (-2.0 / k).exp())
}

/// `sigma_a^2` such that `E|H(f)|^2 = target_power`.
///
/// `E|H(f)|^2 = sigma_a^2 E_K[power_profile_sum(K)]` for every `f`; the expectation
/// is a Poisson series truncated once the accumulated mass exceeds `1 - 1e-12`.
pub fn calibrate_sigma_a(lambda: f64, target_power: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::param("lambda", "must be finite and > 0"));
    }
    if !(target_power.is_finite() && target_power > 0.0) {
        return Err(Error::param("target_power", "must be finite and > 0"));
    }
    let ln_lambda = lambda.ln();
    let mut ln_fact = 0.0;
    let mut mass = 0.0;
    let mut expectation = 0.0;
    let limit = (lambda + 40.0 * lambda.sqrt() + 100.0) as usize;
    for n in 0..=limit {
        if n > 0 {
            ln_fact += (n as f64).ln();
        }
        let pmf = (n as f64 * ln_lambda - lambda - ln_fact).exp();
        mass += pmf;
        expectation += pmf * power_profile_sum(n + 1);
        if mass > 1.0 - 1e-12 {
            break;
        }
    }
    Ok(target_power * mass / expectation)
}

/// Writes channels in the line format
///
/// ```text
/// # channel=<index> delay_spread=<T_h> seed=<seed> taps=<K>
/// <tau> <re(a)> <im(a)>
/// ```
///
/// Floats use the shortest representation that reads back exactly.
pub fn write_channels<W: Write>(
    mut out: W,
    seed: u64,
    channels: &[(u64, SparseChannel)],
) -> std::io::Result<()> {
    for (index, ch) in channels {
        writeln!(
            out,
            "# channel={index} delay_spread={:?} seed={seed} taps={}",
            ch.delay_spread,
            ch.taps.len()
        )?;
        for t in &ch.taps {
            writeln!(
                out,
                "{:?} {:?} {:?}",
                t.delay, t.amplitude.re, t.amplitude.im
            )?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRecord {
    pub index: u64,
    pub seed: u64,
    pub channel: SparseChannel,
}

pub fn read_channels<R: BufRead>(input: R) -> Result<Vec<ChannelRecord>> {
    struct Pending {
        index: u64,
        seed: u64,
        delay_spread: f64,
        expected: usize,
        taps: Vec<Tap>,
    }
    fn finish(p: Pending, line: usize) -> Result<ChannelRecord> {
        if p.taps.len() != p.expected {
            return Err(Error::Parse {
                line,
                reason: format!("expected {} taps, found {}", p.expected, p.taps.len()),
            });
        }
        Ok(ChannelRecord {
            index: p.index,
            seed: p.seed,
            channel: SparseChannel::new(p.taps, p.delay_spread)?,
        })
    }

    let mut records = Vec::new();
    let mut pending: Option<Pending> = None;
    let mut last_line = 0;
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        last_line = lineno;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            reason: e.to_string(),
        })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |reason: &str| Error::Parse {
            line: lineno,
            reason: reason.to_string(),
        };
        if let Some(header) = line.strip_prefix('#') {
            if let Some(p) = pending.take() {
                records.push(finish(p, lineno)?);
            }
            let mut p = Pending {
                index: 0,
                seed: 0,
                delay_spread: f64::NAN,
                expected: 0,
                taps: Vec::new(),
            };
            for field in header.split_whitespace() {
                let (key, value) = field
                    .split_once('=')
                    .ok_or_else(|| bad("malformed header field"))?;
                match key {
                    "channel" => p.index = value.parse().map_err(|_| bad("bad channel index"))?,
                    "seed" => p.seed = value.parse().map_err(|_| bad("bad seed"))?,
                    "delay_spread" => {
                        p.delay_spread = value.parse().map_err(|_| bad("bad delay_spread"))?
                    }
                    "taps" => p.expected = value.parse().map_err(|_| bad("bad tap count"))?,
                    _ => return Err(bad("unknown header field")),
                }
            }
            pending = Some(p);
        } else {
            let p = pending
                .as_mut()
                .ok_or_else(|| bad("tap line before header"))?;
            let nums: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("tap line must hold three numbers"))?;
            if nums.len() != 3 {
                return Err(bad("tap line must hold three numbers"));
            }
            p.taps.push(Tap {
                delay: nums[0],
                amplitude: Complex64::new(nums[1], nums[2]),
            });
        }
    }
    if let Some(p) = pending {
        records.push(finish(p, last_line)?);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use approx::assert_relative_eq;

    #[test]
    fn single_tap_spectrum() {
        let ch = SparseChannel::impulse(0.3, 1.0).unwrap();
        assert_eq!(ch.spectrum(0.0), Complex64::new(1.0, 0.0));
        for &f in &[0.1, 1.7, -3.2, 250.0] {
            let h = ch.spectrum(f);
            assert_relative_eq!(h.norm(), 1.0, epsilon = 1e-15);
            let expected = Complex64::from_polar(1.0, -2.0 * PI * 0.3 * f);
            assert_relative_eq!((h - expected).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn two_tap_spectrum_by_direct_summation() {
        let ch = SparseChannel::new(
            vec![
                Tap {
                    delay: 1e-3,
                    amplitude: Complex64::new(1.0, 0.0),
                },
                Tap {
                    delay: 2e-3,
                    amplitude: Complex64::new(-1.0, 0.0),
                },
            ],
            5e-3,
        )
        .unwrap();
        // exp(-j pi/2) - exp(-j pi) = -j + 1
        let h = ch.spectrum(250.0);
        assert_relative_eq!(h.re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(h.im, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn channel_validation() {
        let tap = |delay| Tap {
            delay,
            amplitude: Complex64::new(1.0, 0.0),
        };
        assert!(SparseChannel::new(vec![tap(0.0)], 1.0).is_err());
        assert!(SparseChannel::new(vec![tap(1.0)], 1.0).is_err());
        assert!(SparseChannel::new(vec![], 1.0).is_err());
        assert!(SparseChannel::new(vec![tap(0.5)], 0.0).is_err());
        assert!(SparseChannel::new(vec![tap(0.5)], 1.0).is_ok());
    }

    #[test]
    fn calibration_limits() {
        assert_relative_eq!(calibrate_sigma_a(1e-12, 1.0).unwrap(), 1.0, epsilon = 1e-10);
        for &lambda in &[0.5, 9.0, 40.0, 2000.0] {
            let one = calibrate_sigma_a(lambda, 1.0).unwrap();
            let four = calibrate_sigma_a(lambda, 4.0).unwrap();
            assert_relative_eq!(four, 4.0 * one, max_relative = 1e-15);
        }
        assert!(calibrate_sigma_a(0.0, 1.0).is_err());
        assert!(calibrate_sigma_a(9.0, -1.0).is_err());
    }

    #[test]
    fn calibration_matches_monte_carlo() {
        let mut rng = stream_rng(99, Stream::Channel(0));
        let poisson = Poisson::new(9.0).unwrap();
        let n = 1_000_000;
        let mean: f64 = (0..n)
            .map(|_| power_profile_sum(poisson.sample(&mut rng) as usize + 1))
            .sum::<f64>()
            / n as f64;
        let mc = 1.0 / mean;
        let series = calibrate_sigma_a(9.0, 1.0).unwrap();
        assert!((series / mc - 1.0).abs() < 2e-3, "series {series} mc {mc}");
    }

    #[test]
    fn power_profile_sum_matches_loop() {
        for k in 1..30 {
            let direct: f64 = (0..k).map(|i| (-2.0 * i as f64 / k as f64).exp()).sum();
            assert_relative_eq!(power_profile_sum(k), direct, max_relative = 1e-13);
        }
    }

    #[test]
    fn draws_are_reproducible() {
        let p = ChannelModelParams::unit_power(9.0, 1.0 / 64.0, 7).unwrap();
        let a = p.draw(&mut stream_rng(p.seed, Stream::Channel(4)));
        let b = p.draw(&mut stream_rng(p.seed, Stream::Channel(4)));
        assert_eq!(a, b);
        for nf in a.normalized_frequencies() {
            assert!(nf > -0.5 && nf < 0.5);
        }
    }

    #[test]
    fn tap_count_mean() {
        let p = ChannelModelParams::unit_power(9.0, 1.0, 3).unwrap();
        let mut rng = stream_rng(3, Stream::Channel(0));
        let n = 100_000;
        let total: usize = (0..n).map(|_| p.draw(&mut rng).taps().len()).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 10.0).abs() < 0.05, "mean K = {mean}");
    }

    #[test]
    fn small_lambda_gives_single_tap_of_full_variance() {
        let p = ChannelModelParams {
            lambda: 1e-9,
            delay_spread: 1.0,
            tap_variance: 2.0,
            seed: 0,
        };
        let mut rng = stream_rng(0, Stream::Channel(0));
        let n = 40_000;
        let mut power = 0.0;
        for _ in 0..n {
            let ch = p.draw(&mut rng);
            assert_eq!(ch.taps().len(), 1);
            power += ch.taps()[0].amplitude.norm_sqr();
        }
        let mean = power / n as f64;
        assert!((mean / 2.0 - 1.0).abs() < 0.03, "E|a|^2 = {mean}");
    }

    #[test]
    fn text_format_round_trip() {
        let p = ChannelModelParams::unit_power(9.0, 1.0 / 128.0, 21).unwrap();
        let chans: Vec<(u64, SparseChannel)> = (0..4)
            .map(|i| (i, p.draw(&mut stream_rng(21, Stream::Channel(i)))))
            .collect();
        let mut buf = Vec::new();
        write_channels(&mut buf, 21, &chans).unwrap();
        let back = read_channels(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 4);
        for (rec, (i, ch)) in back.iter().zip(&chans) {
            assert_eq!(rec.index, *i);
            assert_eq!(rec.seed, 21);
            assert_eq!(&rec.channel, ch);
        }
    }

    #[test]
    fn text_format_errors() {
        assert!(read_channels("0.1 0.2 0.3\n".as_bytes()).is_err());
        let short = "# channel=0 delay_spread=1 seed=0 taps=2\n0.5 1 0\n";
        assert!(matches!(
            read_channels(short.as_bytes()),
            Err(Error::Parse { .. })
        ));
        let outside = "# channel=0 delay_spread=1 seed=0 taps=1\n1.5 1 0\n";
        assert!(matches!(
            read_channels(outside.as_bytes()),
            Err(Error::InvalidChannel(_))
        ));
    }
}
