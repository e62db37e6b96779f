//! Band-limited signal estimation from nonuniform noisy samples.
//!
//! The crate is organised bottom-up:
//!
//! * [`sinc`] and [`estimator`]: the generic estimator for a bounded signal whose
//!   spectrum lies in `]-1/2, 1/2[`, sampled at arbitrary distinct abscissas. The
//!   estimator solves a ridge-regularised sinc Gram system and comes with a
//!   closed-form squared-error bound.
//! * [`channel`] and [`ofdm`]: sparse multipath channels, pilot observations and the
//!   normalisation that turns channel-spectrum estimation into the generic problem.
//! * [`tdl`]: the tapped-delay-line least-squares (deterministic ML) baseline.
//! * [`experiments`]: analytic MSE of linear estimators, Monte Carlo RMS curves,
//!   the delay/frequency reduction surface and the bound-dominance suite.
//! * [`cli`]: the `nusest` command-line front end and its output writers.

pub mod channel;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod ofdm;
pub mod rng;
pub mod sinc;
pub mod tdl;

pub use num_complex::Complex64;

pub use channel::{ChannelModelParams, SparseChannel, Tap};
pub use error::{Error, Result};
pub use estimator::{EstimatorDesign, SampleVector};
pub use ofdm::{PilotGrid, PilotObservations, SincSpectrumEstimator};
pub use tdl::{TdlEstimator, TdlFit, TdlModelSpec};
