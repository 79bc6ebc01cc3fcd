//! The day loop: forecaster publishes μ_t, the adversary fixes the outcome
//! law, an outcome is drawn, the forecaster observes it.
//!
//! Oblivious adversaries move first and their law is passed to the
//! forecaster as a hint; adaptive adversaries move after seeing μ_t.

use std::sync::Arc;

use crate::adversary::{Adversary, AdversaryView};
use crate::error::{Error, Result};
use crate::forecaster::{sample_prediction, Forecaster, Mode};
use crate::rng::{stream, Role};
use crate::simplex::{DiscreteSampler, KeyId, Outcome, RationalDist};
use crate::transcript::{DayRecord, RunHeader, Transcript};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimOptions {
    pub mode: Mode,
    pub record_adversary: bool,
}

/// Runs `header.days` days of the protocol for one trial. Prediction draws
/// use the trial's forecaster stream and outcome draws its outcome stream.
pub fn simulate(
    forecaster: &mut dyn Forecaster,
    adversary: &mut dyn Adversary,
    header: RunHeader,
    trial: u64,
    opts: SimOptions,
) -> Result<Transcript> {
    let seed = header.seed;
    let days = header.days;
    let d = header.d;
    let mut tr = Transcript::new(RunHeader {
        mode: opts.mode,
        ..header
    });
    tr.days.reserve(days as usize);
    let mut pred_rng = stream(seed, Role::Forecaster, trial);
    let mut outcome_rng = stream(seed, Role::Outcome, trial);
    let mut past_predictions: Vec<Option<KeyId>> = Vec::with_capacity(days as usize);
    let mut past_outcomes: Vec<Outcome> = Vec::with_capacity(days as usize);
    // the last law seen, its sampler and (when recorded) its key
    let mut law_cache: Option<(Arc<RationalDist>, DiscreteSampler, Option<KeyId>)> = None;
    let adaptive = adversary.is_adaptive();

    for t in 1..=days {
        let (mixture, law) = if adaptive {
            let mixture = forecaster.mixture(t, &mut tr.keys, None)?;
            let view = AdversaryView {
                t,
                past_predictions: &past_predictions,
                past_outcomes: &past_outcomes,
                mixture: Some(&mixture),
                keys: &tr.keys,
            };
            let law = adversary.next(&view)?;
            (mixture, law)
        } else {
            let view = AdversaryView {
                t,
                past_predictions: &past_predictions,
                past_outcomes: &past_outcomes,
                mixture: None,
                keys: &tr.keys,
            };
            let law = adversary.next(&view)?;
            let mixture = forecaster.mixture(t, &mut tr.keys, Some(&law))?;
            (mixture, law)
        };
        if law.dim() != d {
            return Err(Error::DimensionMismatch {
                left: d,
                right: law.dim(),
            });
        }
        let realized = match opts.mode {
            Mode::Sampled => Some(sample_prediction(&mixture, &mut pred_rng)),
            Mode::Distributional => None,
        };
        let fresh = !matches!(&law_cache, Some((prev, _, _)) if Arc::ptr_eq(prev, &law) || **prev == *law);
        if fresh {
            let key = opts.record_adversary.then(|| tr.keys.intern(&law));
            law_cache = Some((Arc::clone(&law), DiscreteSampler::new(&law), key));
        }
        let (_, sampler, law_key) = law_cache.as_ref().expect("filled above");
        let outcome = sampler.sample(&mut outcome_rng);
        forecaster.observe(t, outcome)?;
        past_predictions.push(realized);
        past_outcomes.push(outcome);
        tr.days.push(DayRecord {
            mixture,
            realized,
            outcome,
            adversary: *law_key,
        });
    }
    Ok(tr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{adaptive_argmin_adversary, iid_adversary};
    use crate::forecaster::{ForecastConfig, HierarchicalForecaster};
    use crate::rng::PRNG_NAME;

    fn header(cfg: &ForecastConfig, seed: u64) -> RunHeader {
        RunHeader {
            run_id: "test".into(),
            seed,
            prng: PRNG_NAME.into(),
            d: cfg.d,
            config: Some(*cfg),
            mode: Mode::Sampled,
            adversary: "iid".into(),
            days: cfg.horizon(),
        }
    }

    fn opts() -> SimOptions {
        SimOptions {
            mode: Mode::Sampled,
            record_adversary: true,
        }
    }

    #[test]
    fn same_seed_same_transcript() {
        let cfg = ForecastConfig::new(3, 2, 3, 2, 2).unwrap();
        let run = |seed| {
            let mut f = HierarchicalForecaster::new(cfg);
            let mut a = iid_adversary(RationalDist::from_u64(&[1, 2, 3], 6).unwrap());
            let tr = simulate(&mut f, &mut a, header(&cfg, seed), 0, opts()).unwrap();
            let mut buf = Vec::new();
            tr.write_jsonl(&mut buf).unwrap();
            buf
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn adaptive_outcomes_follow_the_argmin() {
        let cfg = ForecastConfig::new(2, 1, 4, 1, 1).unwrap();
        let mut f = HierarchicalForecaster::new(cfg);
        let mut a = adaptive_argmin_adversary();
        let tr = simulate(&mut f, &mut a, header(&cfg, 1), 0, opts()).unwrap();
        // day 1 is uniform, ties go to coordinate 1; afterwards the forecaster
        // leans towards 1, so the adversary switches to 2
        let xs: Vec<usize> = tr.outcomes().iter().map(|x| x.index()).collect();
        assert_eq!(xs, vec![1, 2, 1, 2]);
        for day in &tr.days {
            let law = tr.keys.get(day.adversary.unwrap());
            assert_eq!(law.coord_f64(day.outcome.zero_based()), 1.0);
        }
    }
}
