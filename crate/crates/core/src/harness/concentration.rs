//! Gap between the realized-prediction ECE and the DCE of the same outcome
//! sequence, as the base interval length `S` grows.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forecaster::{ForecastConfig, HierarchicalForecaster, Mode};
use crate::harness::config::{AdversarySpec, RunConfig};
use crate::harness::protocol::{simulate, SimOptions};
use crate::harness::run_header;
use crate::metrics::{dce, ece_trajectory, mean_stderr};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapRow {
    #[serde(rename = "S")]
    pub base_len: u64,
    #[serde(rename = "T")]
    pub horizon: u64,
    pub trials: usize,
    /// Mean of `|ECE − DCE| / T` over trials.
    pub mean_gap: f64,
    pub stderr: f64,
    pub max_gap: f64,
    pub epsilon: f64,
    /// `mean_gap ≤ 5ε`.
    pub within_budget: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub small: GapRow,
    pub large: GapRow,
    /// Mean gap at the larger `S` is below the smaller one by more than
    /// three combined standard errors (or both are exactly zero).
    pub decreasing: bool,
    pub pass: bool,
}

/// Per-trial `|ECE − DCE| / T` for one config.
pub fn gap_row(cfg: &RunConfig, seed: u64, trials: usize) -> Result<GapRow> {
    if cfg.adversary.is_adaptive() {
        return Err(Error::AdaptiveAdversaryUnsupported(cfg.adversary.name()));
    }
    if trials < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 trials, got {trials}")));
    }
    let fc = cfg.forecast;
    let t = fc.horizon() as f64;
    let gaps = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut f = HierarchicalForecaster::new(fc);
            let mut adv = cfg.adversary.build(seed, trial);
            let header = run_header(cfg, seed);
            let opts = SimOptions {
                mode: Mode::Sampled,
                record_adversary: false,
            };
            let tr = simulate(&mut f, adv.as_mut(), header, trial, opts)?;
            Ok((ece_trajectory(&tr)? - dce(&tr)?).abs() / t)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, stderr) = mean_stderr(&gaps);
    Ok(GapRow {
        base_len: fc.base_len,
        horizon: fc.horizon(),
        trials,
        mean_gap: mean,
        stderr,
        max_gap: gaps.iter().cloned().fold(0.0, f64::max),
        epsilon: fc.epsilon(),
        within_budget: mean <= 5.0 * fc.epsilon(),
    })
}

/// Compares the config's `S` with `compare_s` (default `16·S`).
pub fn run_concentration(cfg: &RunConfig, trials: usize, seed: u64, compare_s: Option<u64>) -> Result<ConcentrationReport> {
    if matches!(cfg.adversary, AdversarySpec::Hard(_)) {
        return Err(Error::ConfigInvalid("the hard sequence fixes T, so S cannot vary".into()));
    }
    let fc = cfg.forecast;
    let big = compare_s.unwrap_or(16 * fc.base_len);
    let mut large_cfg = cfg.clone();
    large_cfg.forecast = ForecastConfig::new(fc.d, fc.levels, fc.iterations, big, fc.m)?;
    large_cfg.forecast.check_budget(cfg.budget)?;
    let small = gap_row(cfg, seed, trials)?;
    let large = gap_row(&large_cfg, seed, trials)?;
    let spread = 3.0 * (small.stderr.powi(2) + large.stderr.powi(2)).sqrt();
    let decreasing = if small.mean_gap == 0.0 && large.mean_gap == 0.0 {
        true
    } else if big > fc.base_len {
        small.mean_gap - large.mean_gap > spread
    } else {
        large.mean_gap - small.mean_gap > spread
    };
    let pass = decreasing && small.within_budget && large.within_budget;
    Ok(ConcentrationReport {
        small,
        large,
        decreasing,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_level_has_no_gap() {
        let cfg = RunConfig::parse("d = 3\nL = 1\nH = 4\nS = 4\nm = 2").unwrap();
        let row = gap_row(&cfg, 9, 4).unwrap();
        assert_eq!(row.mean_gap, 0.0);
        assert_eq!(row.max_gap, 0.0);
    }

    #[test]
    fn adaptive_is_rejected() {
        let cfg = RunConfig::parse("d = 2\nL = 2\nH = 2\nS = 1\nm = 1\nadversary = adaptive_argmin").unwrap();
        assert!(matches!(
            run_concentration(&cfg, 4, 0, None),
            Err(Error::AdaptiveAdversaryUnsupported(_))
        ));
    }
}
