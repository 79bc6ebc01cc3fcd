//! Randomized comparison of the metric implementations against the
//! brute-force references.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forecaster::sample_prediction;
use crate::metrics::oracle::{exhaustive_ece, oracle_dce_direct};
use crate::metrics::{dce, ece_estimate};
use crate::rng::{stream, Role};
use crate::simplex::{Outcome, RationalDist};
use crate::transcript::Transcript;

/// Number of exhaustive-ECE cases per oracle run.
pub const ECE_CASES: usize = 10;
/// Trajectories per exhaustive-ECE comparison.
pub const ECE_TRIALS: usize = 2000;
/// Largest horizon for which every prediction assignment is enumerated.
pub const ECE_MAX_T: u64 = 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EceCase {
    pub days: u64,
    pub exact: f64,
    pub mean: f64,
    pub stderr: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub trials: usize,
    pub max_t: u64,
    pub max_d: usize,
    /// Largest `|dce − oracle_dce_direct|` over the random transcripts.
    pub max_dce_diff: f64,
    pub dce_failures: usize,
    pub ece_cases: Vec<EceCase>,
    pub pass: bool,
}

fn random_dist(rng: &mut ChaCha8Rng, d: usize) -> RationalDist {
    loop {
        let w: Vec<u64> = (0..d).map(|_| rng.gen_range(0..=4)).collect();
        if let Ok(p) = RationalDist::from_weights(&w) {
            return p;
        }
    }
}

/// A transcript with `days` days over `[d]`, each day a random mixture of at
/// most `max_keys` predictions drawn from a small shared pool, so that
/// values repeat across days.
pub fn random_transcript(rng: &mut ChaCha8Rng, d: usize, days: u64, max_keys: usize) -> Result<Transcript> {
    let pool_size = rng.gen_range(1..=4);
    let pool: Vec<RationalDist> = (0..pool_size).map(|_| random_dist(rng, d)).collect();
    let mut tr = Transcript::blank(d);
    for _ in 0..days {
        let keys = rng.gen_range(1..=max_keys);
        let den = rng.gen_range(keys as u64..=6);
        // split den into `keys` positive parts
        let mut weights = vec![1u64; keys];
        for _ in keys as u64..den {
            weights[rng.gen_range(0..keys)] += 1;
        }
        let entries: Vec<(RationalDist, u64)> = weights
            .into_iter()
            .map(|w| (pool[rng.gen_range(0..pool.len())].clone(), w))
            .collect();
        let x = Outcome::new(rng.gen_range(1..=d), d)?;
        tr.push_day(&entries, den, x, None)?;
    }
    Ok(tr)
}

/// Same days as `tr`, with realized predictions drawn from the trial's
/// forecaster stream.
fn resample(tr: &Transcript, seed: u64, trial: u64) -> Transcript {
    let mut rng = stream(seed, Role::Forecaster, trial);
    let mut out = tr.clone();
    for day in &mut out.days {
        day.realized = Some(sample_prediction(&day.mixture, &mut rng));
    }
    out
}

pub fn run_oracle(trials: usize, max_t: u64, max_d: usize, seed: u64) -> Result<OracleReport> {
    if !(2..=6).contains(&max_d) {
        return Err(Error::InvalidArgument(format!("max-d must lie in [2, 6], got {max_d}")));
    }
    if !(1..=64).contains(&max_t) {
        return Err(Error::InvalidArgument(format!("max-T must lie in [1, 64], got {max_t}")));
    }
    let mut rng = stream(seed, Role::CaseGen, 0);
    let mut max_diff: f64 = 0.0;
    let mut dce_failures = 0;
    for _ in 0..trials {
        let d = rng.gen_range(2..=max_d);
        let days = rng.gen_range(1..=max_t);
        let tr = random_transcript(&mut rng, d, days, 3)?;
        let diff = (dce(&tr)? - oracle_dce_direct(&tr)).abs();
        max_diff = max_diff.max(diff);
        if diff > 1e-12 {
            dce_failures += 1;
        }
    }

    let mut ece_cases = Vec::with_capacity(ECE_CASES);
    for case in 0..ECE_CASES {
        let days = rng.gen_range(1..=ECE_MAX_T.min(max_t));
        let tr = random_transcript(&mut rng, 2, days, 2)?;
        let exact = exhaustive_ece(&tr, 1 << ECE_MAX_T)?;
        let case_seed = seed ^ ((case as u64 + 1) << 48);
        let est = ece_estimate(ECE_TRIALS, |trial| Ok(resample(&tr, case_seed, trial)))?;
        let pass = (est.mean - exact).abs() <= 3.0 * est.stderr + 1e-12;
        ece_cases.push(EceCase {
            days,
            exact,
            mean: est.mean,
            stderr: est.stderr,
            pass,
        });
    }
    let pass = dce_failures == 0 && ece_cases.iter().all(|c| c.pass);
    Ok(OracleReport {
        trials,
        max_t,
        max_d,
        max_dce_diff: max_diff,
        dce_failures,
        ece_cases,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes_and_is_reproducible() {
        let a = run_oracle(20, 8, 3, 11).unwrap();
        assert!(a.dce_failures == 0, "{a:?}");
        assert_eq!(a, run_oracle(20, 8, 3, 11).unwrap());
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(run_oracle(1, 8, 1, 0).is_err());
        assert!(run_oracle(1, 65, 2, 0).is_err());
    }
}
