//! Brute-force references for the calibration metrics. These share nothing
//! with the grouped accumulators in the parent module: predictions are
//! compared coordinate by coordinate as rationals, and sums run over the
//! naive `(value, day)` double loop.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::simplex::ratio_to_f64;
use crate::transcript::Transcript;

type Point = Vec<BigRational>;

fn point(tr: &Transcript, key: crate::simplex::KeyId) -> Point {
    let p = tr.keys.get(key);
    (0..p.dim()).map(|i| p.coord(i)).collect()
}

fn one_hot(d: usize, index: usize) -> Point {
    (0..d)
        .map(|i| if i + 1 == index { BigRational::one() } else { BigRational::zero() })
        .collect()
}

/// DCE recomputed by the naive `(value, day)` double loop with exact
/// accumulation and a single final conversion to `f64`.
pub fn oracle_dce_direct(tr: &Transcript) -> f64 {
    let d = tr.d();
    let mut values: Vec<Point> = Vec::new();
    for day in &tr.days {
        for e in &day.mixture.entries {
            let p = point(tr, e.key);
            if !values.contains(&p) {
                values.push(p);
            }
        }
    }
    let mut total = BigRational::zero();
    for value in &values {
        let mut inner = vec![BigRational::zero(); d];
        for day in &tr.days {
            let x = one_hot(d, day.outcome.index());
            let den = BigInt::from(day.mixture.denominator);
            for e in &day.mixture.entries {
                if point(tr, e.key) != *value {
                    continue;
                }
                let w = BigRational::new(BigInt::from(e.weight), den.clone());
                for i in 0..d {
                    inner[i] += (&value[i] - &x[i]) * &w;
                }
            }
        }
        for v in inner {
            total += v.abs();
        }
    }
    ratio_to_f64(&total)
}

/// Exact ECE by enumerating every assignment of realized predictions,
/// weighting each by `Π_t μ_t(p_t)`. Outcomes are taken as fixed.
pub fn exhaustive_ece(tr: &Transcript, max_assignments: u64) -> Result<f64> {
    let d = tr.d();
    let sizes: Vec<usize> = tr.days.iter().map(|day| day.mixture.entries.len()).collect();
    let count = sizes
        .iter()
        .try_fold(1u64, |acc, &s| acc.checked_mul(s as u64))
        .filter(|&c| c <= max_assignments)
        .ok_or_else(|| Error::InvalidArgument("too many prediction assignments to enumerate".into()))?;
    let points: Vec<Vec<Point>> = tr
        .days
        .iter()
        .map(|day| day.mixture.entries.iter().map(|e| point(tr, e.key)).collect())
        .collect();
    let mut expectation = BigRational::zero();
    let mut choice = vec![0usize; sizes.len()];
    for _ in 0..count {
        let mut prob = BigRational::one();
        // (value, Σ_t (p_t − X_t) over days predicting it)
        let mut groups: Vec<(&Point, Point)> = Vec::new();
        for (t, day) in tr.days.iter().enumerate() {
            let e = &day.mixture.entries[choice[t]];
            prob *= BigRational::new(BigInt::from(e.weight), BigInt::from(day.mixture.denominator));
            let p = &points[t][choice[t]];
            let x = one_hot(d, day.outcome.index());
            let slot = match groups.iter().position(|(v, _)| *v == p) {
                Some(i) => i,
                None => {
                    groups.push((p, vec![BigRational::zero(); d]));
                    groups.len() - 1
                }
            };
            for i in 0..d {
                groups[slot].1[i] += &p[i] - &x[i];
            }
        }
        let ece: BigRational = groups
            .iter()
            .flat_map(|(_, s)| s.iter().map(|v| v.abs()))
            .fold(BigRational::zero(), |a, b| a + b);
        expectation += prob * ece;
        // next assignment, day 1 fastest
        for (c, &s) in choice.iter_mut().zip(&sizes) {
            *c += 1;
            if *c < s {
                break;
            }
            *c = 0;
        }
    }
    Ok(ratio_to_f64(&expectation))
}
