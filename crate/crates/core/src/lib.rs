//! Hierarchical calibrated forecasting over the probability simplex.
//!
//! The crate bundles exact simplex arithmetic, the multi-level smoothed
//! forecaster, oblivious and adaptive outcome adversaries (including the
//! randomized hard sequence), distributional and expected calibration error,
//! pathwise certificates of the forecaster's guarantee, and the experiment
//! harness behind the `hicalib` binary.

pub mod adversary;
pub mod certificate;
pub mod error;
pub mod forecaster;
pub mod harness;
pub mod metrics;
pub mod rng;
pub mod simplex;
pub mod transcript;

pub use error::{Error, Result};
pub use forecaster::{paper_parameters, ForecastConfig, Forecaster, HierarchicalForecaster, MixtureRecord, Mode};
pub use simplex::{Outcome, RationalDist};
pub use transcript::Transcript;
