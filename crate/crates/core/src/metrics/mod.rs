//! Calibration error functionals.
//!
//! All inner sums `Σ_t (p − X_t)·μ_t(p)` are accumulated exactly: weights are
//! integer numerators over a per-day denominator, outcomes are one-hot, so the
//! accumulators are plain integers per `(key, denominator)`. Each `|·|` term is
//! converted to `f64` once.

pub mod oracle;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::simplex::{ratio_to_f64, KeyId, PredictionKey, RationalDist};
use crate::transcript::Transcript;

/// Day/prediction/outcome restriction for [`dce_restricted`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RestrictionSpec {
    /// Days (1-based).
    pub days: BTreeSet<u64>,
    pub predictions: BTreeSet<PredictionKey>,
    /// Outcome coordinates (1-based).
    pub coords: BTreeSet<usize>,
}

impl RestrictionSpec {
    /// Every day, every prediction that appears in a mixture, every coordinate.
    pub fn full(tr: &Transcript) -> Self {
        let predictions = tr
            .days
            .iter()
            .flat_map(|day| day.mixture.entries.iter().map(|e| e.key))
            .collect::<BTreeSet<KeyId>>()
            .into_iter()
            .map(|k| crate::simplex::canonical_key(tr.keys.get(k)))
            .collect();
        Self {
            days: (1..=tr.horizon()).collect(),
            predictions,
            coords: (1..=tr.d()).collect(),
        }
    }
}

/// A run of consecutive days sharing one weighting: `entries` over `den`,
/// with `hist[i]` days whose outcome was `i+1`.
struct Block {
    first_day: u64,
    entries: Vec<(KeyId, u64)>,
    den: u64,
    hist: Vec<u64>,
}

/// Per-key `(Σ μ_t(p), Σ μ_t(p)·X_t)`, exact, keyed by prediction value.
struct Sums {
    per_key: BTreeMap<RationalDist, (BigRational, Vec<BigRational>)>,
}

fn accumulate(tr: &Transcript, blocks: impl Iterator<Item = Block>, keep_key: impl Fn(KeyId) -> bool) -> Result<Sums> {
    let d = tr.d();
    // (Σ w·n_days, Σ w·hist) per (key, denominator)
    let mut raw: HashMap<(KeyId, u64), (u128, Vec<u128>)> = HashMap::new();
    for block in blocks {
        if block.entries.is_empty() || block.den == 0 {
            return Err(Error::MissingMixture(block.first_day));
        }
        let n: u64 = block.hist.iter().sum();
        for &(key, w) in &block.entries {
            if !keep_key(key) {
                continue;
            }
            let acc = raw.entry((key, block.den)).or_insert_with(|| (0, vec![0; d]));
            acc.0 += w as u128 * n as u128;
            for (slot, &h) in acc.1.iter_mut().zip(&block.hist) {
                *slot += w as u128 * h as u128;
            }
        }
    }
    let mut per_key: BTreeMap<RationalDist, (BigRational, Vec<BigRational>)> = BTreeMap::new();
    // fold denominators in a fixed order
    let mut raw: Vec<_> = raw.into_iter().collect();
    raw.sort_by_key(|((k, den), _)| (*k, *den));
    for ((key, den), (mass, outcome_mass)) in raw {
        let den = BigInt::from(den);
        let slot = per_key
            .entry(tr.keys.get(key).clone())
            .or_insert_with(|| (BigRational::zero(), vec![BigRational::zero(); d]));
        slot.0 += BigRational::new(BigInt::from(mass), den.clone());
        for (c, m) in slot.1.iter_mut().zip(outcome_mass) {
            *c += BigRational::new(BigInt::from(m), den.clone());
        }
    }
    Ok(Sums { per_key })
}

impl Sums {
    /// `Σ_p Σ_{i∈coords} |S_p·p_i − C_{p,i}|` as (exact, per-term-float).
    fn total(&self, coords: impl Fn(usize) -> bool) -> (BigRational, f64) {
        let mut exact = BigRational::zero();
        let mut float = 0.0;
        for (p, (mass, outcome_mass)) in &self.per_key {
            for (i, c) in outcome_mass.iter().enumerate() {
                if !coords(i + 1) {
                    continue;
                }
                let term = (mass * p.coord(i) - c).abs();
                float += ratio_to_f64(&term);
                exact += term;
            }
        }
        (exact, float)
    }
}

/// Groups consecutive kept days that share a mixture into blocks.
fn mixture_blocks<'a>(tr: &'a Transcript, keep_day: impl Fn(u64) -> bool + 'a) -> impl Iterator<Item = Block> + 'a {
    let d = tr.d();
    let mut days = tr
        .days
        .iter()
        .enumerate()
        .filter(move |(i, _)| keep_day(*i as u64 + 1))
        .peekable();
    std::iter::from_fn(move || {
        let (i, first) = days.next()?;
        let mut hist = vec![0u64; d];
        hist[first.outcome.zero_based()] += 1;
        while let Some((_, next)) = days.next_if(|(_, day)| Arc::ptr_eq(&day.mixture, &first.mixture)) {
            hist[next.outcome.zero_based()] += 1;
        }
        Some(Block {
            first_day: i as u64 + 1,
            entries: first.mixture.entries.iter().map(|e| (e.key, e.weight)).collect(),
            den: first.mixture.denominator,
            hist,
        })
    })
}

fn dce_sums(tr: &Transcript, keep_day: impl Fn(u64) -> bool, keep_key: impl Fn(KeyId) -> bool) -> Result<Sums> {
    accumulate(tr, mixture_blocks(tr, keep_day), keep_key)
}

/// Distributional calibration error `Σ_p ‖Σ_t (p − X_t)·μ_t(p)‖₁`.
pub fn dce(tr: &Transcript) -> Result<f64> {
    Ok(dce_sums(tr, |_| true, |_| true)?.total(|_| true).1)
}

/// [`dce`] as an exact rational.
pub fn dce_exact(tr: &Transcript) -> Result<BigRational> {
    Ok(dce_sums(tr, |_| true, |_| true)?.total(|_| true).0)
}

/// `Σ_{p∈P} Σ_{i∈D} |Σ_{t∈I} (p(i) − X_t(i))·μ_t(p)|`.
pub fn dce_restricted(tr: &Transcript, spec: &RestrictionSpec) -> Result<f64> {
    let allowed: HashMap<KeyId, bool> = (0..tr.keys.len() as u32)
        .map(KeyId)
        .map(|k| (k, spec.predictions.contains(&crate::simplex::canonical_key(tr.keys.get(k)))))
        .collect();
    let sums = dce_sums(tr, |t| spec.days.contains(&t), |k| allowed[&k])?;
    Ok(sums.total(|i| spec.coords.contains(&i)).1)
}

fn ece_sums(tr: &Transcript) -> Result<Sums> {
    let d = tr.d();
    let blocks = tr
        .days
        .iter()
        .enumerate()
        .map(|(i, day)| {
            let key = day.realized.ok_or(Error::MissingRealizedPrediction(i as u64 + 1))?;
            let mut hist = vec![0u64; d];
            hist[day.outcome.zero_based()] = 1;
            Ok(Block {
                first_day: i as u64 + 1,
                entries: vec![(key, 1)],
                den: 1,
                hist,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    accumulate(tr, blocks.into_iter(), |_| true)
}

/// `Σ_p ‖Σ_t (p_t − X_t)·1[p_t = p]‖₁` on the realized predictions.
pub fn ece_trajectory(tr: &Transcript) -> Result<f64> {
    Ok(ece_sums(tr)?.total(|_| true).1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EceEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

/// Sample mean and standard error of [`ece_trajectory`] over independent
/// trials. `run(trial)` must build trial `trial`'s transcript from its own
/// random streams; trials run in parallel and results do not depend on
/// scheduling.
pub fn ece_estimate<F>(trials: usize, run: F) -> Result<EceEstimate>
where
    F: Fn(u64) -> Result<Transcript> + Sync,
{
    if trials < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 trials, got {trials}")));
    }
    let values = (0..trials as u64)
        .into_par_iter()
        .map(|trial| run(trial).and_then(|tr| ece_trajectory(&tr)))
        .collect::<Result<Vec<f64>>>()?;
    let (mean, stderr) = mean_stderr(&values);
    Ok(EceEstimate { mean, stderr, trials })
}

/// Sample mean and standard error (n−1 variance).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::Outcome;

    fn d(n: &[u64], den: u64) -> RationalDist {
        RationalDist::from_u64(n, den).unwrap()
    }

    fn x(i: usize) -> Outcome {
        Outcome::new(i, 2).unwrap()
    }

    #[test]
    fn dce_examples() {
        let mut tr = Transcript::blank(2);
        tr.push_day(&[(d(&[1, 0], 1), 1)], 1, x(1), None).unwrap();
        assert_eq!(dce(&tr).unwrap(), 0.0);

        let mut tr = Transcript::blank(2);
        let half = RationalDist::uniform(2);
        tr.push_day(&[(half.clone(), 1)], 1, x(1), None).unwrap();
        tr.push_day(&[(half, 1)], 1, x(2), None).unwrap();
        assert_eq!(dce(&tr).unwrap(), 0.0);

        let mut tr = Transcript::blank(2);
        tr.push_day(&[(d(&[1, 0], 1), 1), (d(&[0, 1], 1), 1)], 2, x(1), None).unwrap();
        assert_eq!(dce(&tr).unwrap(), 1.0);
        assert_eq!(dce_exact(&tr).unwrap(), BigRational::from_integer(1.into()));
    }

    #[test]
    fn ece_examples() {
        let mut tr = Transcript::blank(2);
        for o in [1, 2, 2] {
            let p = RationalDist::point_mass(2, x(o));
            tr.push_day(&[(p.clone(), 1)], 1, x(o), Some(&p)).unwrap();
        }
        assert_eq!(ece_trajectory(&tr).unwrap(), 0.0);

        let half = RationalDist::uniform(2);
        let mut tr = Transcript::blank(2);
        tr.push_day(&[(half.clone(), 1)], 1, x(1), Some(&half)).unwrap();
        assert_eq!(ece_trajectory(&tr).unwrap(), 1.0);
        tr.push_day(&[(half.clone(), 1)], 1, x(2), Some(&half)).unwrap();
        assert_eq!(ece_trajectory(&tr).unwrap(), 0.0);

        let mut tr = Transcript::blank(2);
        tr.push_day(&[(half, 1)], 1, x(1), None).unwrap();
        assert!(matches!(ece_trajectory(&tr), Err(Error::MissingRealizedPrediction(1))));
    }

    #[test]
    fn restricted_examples() {
        let half = RationalDist::uniform(2);
        let mut tr = Transcript::blank(2);
        tr.push_day(&[(half.clone(), 1)], 1, x(1), None).unwrap();
        let spec = RestrictionSpec {
            days: [1].into(),
            predictions: [crate::simplex::canonical_key(&half)].into(),
            coords: [1, 2].into(),
        };
        assert_eq!(dce_restricted(&tr, &spec).unwrap(), 1.0);
        let mut empty_p = spec.clone();
        empty_p.predictions.clear();
        assert_eq!(dce_restricted(&tr, &empty_p).unwrap(), 0.0);
        let mut empty_d = spec.clone();
        empty_d.coords.clear();
        assert_eq!(dce_restricted(&tr, &empty_d).unwrap(), 0.0);
        assert_eq!(dce_restricted(&tr, &RestrictionSpec::full(&tr)).unwrap(), dce(&tr).unwrap());
    }

    #[test]
    fn split_entries_do_not_change_dce() {
        let p = d(&[2, 1], 3);
        let q = d(&[1, 3], 4);
        let mut whole = Transcript::blank(2);
        let mut split = Transcript::blank(2);
        whole.push_day(&[(p.clone(), 2), (q.clone(), 1)], 3, x(1), None).unwrap();
        // same day with μ(p) written as 1/3 + 1/3 over denominator 6
        split.push_day(&[(p.clone(), 2), (p.clone(), 2), (q.clone(), 2)], 6, x(1), None).unwrap();
        assert_eq!(dce_exact(&whole).unwrap(), dce_exact(&split).unwrap());
    }

    #[test]
    fn ece_estimate_needs_two_trials() {
        assert!(ece_estimate(1, |_| Ok(Transcript::blank(2))).is_err());
    }

    #[test]
    fn deterministic_mixture_has_zero_stderr() {
        let half = RationalDist::uniform(2);
        let est = ece_estimate(8, |_| {
            let mut tr = Transcript::blank(2);
            tr.push_day(&[(half.clone(), 1)], 1, x(1), Some(&half))?;
            Ok(tr)
        })
        .unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.stderr, 0.0);
    }
}
