//! Monte Carlo DCE of simple forecasters against the randomized hard
//! sequence, compared with the first error level `ε₁·T`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::adversary::{sample_tau_tree, EpsSchedule, HardSeqConfig, HardSequence};
use crate::error::{Error, Result};
use crate::forecaster::{ForecastConfig, Forecaster, HierarchicalForecaster, MixtureRecord, Mode};
use crate::harness::protocol::{simulate, SimOptions};
use crate::metrics::{dce, mean_stderr};
use crate::rng::{stream, Role, PRNG_NAME};
use crate::simplex::{KeyTable, Outcome, RationalDist};
use crate::transcript::RunHeader;

/// Predicts the day's outcome law itself, when the protocol reveals it.
#[derive(Clone, Debug, Default)]
pub struct TruthfulForecaster {
    last: Option<(RationalDist, Arc<MixtureRecord>)>,
}

impl Forecaster for TruthfulForecaster {
    fn name(&self) -> String {
        "truthful".into()
    }

    fn mixture(&mut self, _t: u64, keys: &mut KeyTable, outcome_law: Option<&RationalDist>) -> Result<Arc<MixtureRecord>> {
        let law = outcome_law
            .ok_or_else(|| Error::InvalidArgument("the truthful forecaster needs the outcome law".into()))?;
        if let Some((prev, m)) = &self.last {
            if prev == law {
                return Ok(Arc::clone(m));
            }
        }
        let m = Arc::new(MixtureRecord::point_mass(keys.intern(law)));
        self.last = Some((law.clone(), Arc::clone(&m)));
        Ok(m)
    }

    fn observe(&mut self, _t: u64, _outcome: Outcome) -> Result<()> {
        Ok(())
    }
}

/// Always predicts the uniform distribution.
#[derive(Clone, Debug, Default)]
pub struct UniformForecaster {
    cached: Option<Arc<MixtureRecord>>,
}

impl Forecaster for UniformForecaster {
    fn name(&self) -> String {
        "uniform".into()
    }

    fn mixture(&mut self, _t: u64, keys: &mut KeyTable, outcome_law: Option<&RationalDist>) -> Result<Arc<MixtureRecord>> {
        if self.cached.is_none() {
            let d = outcome_law
                .map(RationalDist::dim)
                .ok_or_else(|| Error::InvalidArgument("the uniform forecaster needs the dimension".into()))?;
            self.cached = Some(Arc::new(MixtureRecord::point_mass(keys.intern(&RationalDist::uniform(d)))));
        }
        Ok(Arc::clone(self.cached.as_ref().expect("set above")))
    }

    fn observe(&mut self, _t: u64, _outcome: Outcome) -> Result<()> {
        Ok(())
    }
}

/// Hierarchical forecaster sized to the hard sequence: `H = K`, `L = R-1`,
/// `S = 1`, `m = 1`, so that `T = K^(R-1)`.
pub fn hierarchical_for(cfg: &HardSeqConfig) -> Result<ForecastConfig> {
    if cfg.blocks < 2 {
        return Err(Error::InvalidArgument(format!(
            "the hierarchical forecaster needs K >= 2 (got K = {})",
            cfg.blocks
        )));
    }
    ForecastConfig::new(cfg.d(), cfg.levels as usize - 1, cfg.blocks as u64, 1, 1)
}

pub fn build_forecaster(name: &str, cfg: &HardSeqConfig) -> Result<Box<dyn Forecaster>> {
    match name {
        "truthful" => Ok(Box::new(TruthfulForecaster::default())),
        "uniform" => Ok(Box::new(UniformForecaster::default())),
        "hierarchical" => Ok(Box::new(HierarchicalForecaster::new(hierarchical_for(cfg)?))),
        other => Err(Error::InvalidForecaster(other.into())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerBoundReport {
    #[serde(rename = "R")]
    pub levels: u32,
    #[serde(rename = "K")]
    pub blocks: u32,
    pub d: usize,
    #[serde(rename = "T")]
    pub horizon: u64,
    pub forecaster: String,
    pub trials: usize,
    pub mean_dce: f64,
    pub stderr: f64,
    /// `ε₁·T`.
    pub reference: f64,
    /// `mean_dce − 3·stderr ≥ reference`.
    pub pass: bool,
}

/// DCE of one trial: fresh tau tree, fresh outcomes.
pub fn lowerbound_trial(cfg: &HardSeqConfig, forecaster: &str, seed: u64, trial: u64) -> Result<f64> {
    let tree = sample_tau_tree(cfg, &mut stream(seed, Role::Tau, trial));
    let mut adversary = HardSequence::new(tree);
    let mut f = build_forecaster(forecaster, cfg)?;
    let header = RunHeader {
        run_id: format!("lowerbound-{forecaster}"),
        seed,
        prng: PRNG_NAME.into(),
        d: cfg.d(),
        config: None,
        mode: Mode::Distributional,
        adversary: format!("hard(R={},K={})", cfg.levels, cfg.blocks),
        days: cfg.horizon(),
    };
    let opts = SimOptions {
        mode: Mode::Distributional,
        record_adversary: false,
    };
    let tr = simulate(f.as_mut(), &mut adversary, header, trial, opts)?;
    dce(&tr)
}

pub fn run_lowerbound(levels: u32, blocks: u32, forecaster: &str, trials: usize, seed: u64) -> Result<LowerBoundReport> {
    let cfg = HardSeqConfig::new(levels, blocks)?;
    if trials < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 trials, got {trials}")));
    }
    // reject bad names and shapes before spawning trials
    build_forecaster(forecaster, &cfg)?;
    let values = (0..trials as u64)
        .into_par_iter()
        .map(|trial| lowerbound_trial(&cfg, forecaster, seed, trial))
        .collect::<Result<Vec<f64>>>()?;
    let (mean, stderr) = mean_stderr(&values);
    let reference = EpsSchedule::new(&cfg).eps(1) * cfg.horizon() as f64;
    Ok(LowerBoundReport {
        levels,
        blocks,
        d: cfg.d(),
        horizon: cfg.horizon(),
        forecaster: forecaster.into(),
        trials,
        mean_dce: mean,
        stderr,
        reference,
        pass: mean - 3.0 * stderr >= reference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_value() {
        let r = run_lowerbound(2, 2, "uniform", 4, 1).unwrap();
        assert_eq!(r.reference, 0.00048828125);
        assert_eq!((r.d, r.horizon), (8, 2));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(run_lowerbound(2, 2, "oracle", 4, 1), Err(Error::InvalidForecaster(_))));
        assert!(run_lowerbound(2, 2, "truthful", 1, 1).is_err());
        assert!(run_lowerbound(2, 1, "hierarchical", 4, 1).is_err());
    }

    #[test]
    fn trials_are_reproducible() {
        let a = run_lowerbound(3, 2, "hierarchical", 8, 3).unwrap();
        let b = run_lowerbound(3, 2, "hierarchical", 8, 3).unwrap();
        assert_eq!(a, b);
    }
}
