//! Exact points of the probability simplex over `[d]`.
//!
//! Predictions, interval averages and adversary distributions are all
//! [`RationalDist`]s: integer numerators over one shared denominator, always
//! stored gcd-reduced so that structural equality is value equality. That is
//! what lets calibration metrics group "days with prediction p" exactly.
//! Entropy, KL and l1 are reported as `f64`, computed from the exact values.

use std::collections::HashMap;
use std::fmt;

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for floating comparisons against exact identities.
pub const FLOAT_TOL: f64 = 1e-9;

/// A probability vector over `[d]` with rational coordinates in canonical form.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RationalDist {
    numerators: Vec<BigUint>,
    denominator: BigUint,
}

impl RationalDist {
    /// Builds a distribution from numerators over a common denominator and
    /// reduces it by the gcd of all entries.
    pub fn new(numerators: Vec<BigUint>, denominator: BigUint) -> Result<Self> {
        if denominator.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        if numerators.len() < 2 {
            return Err(Error::TooFewOutcomes(numerators.len()));
        }
        let sum: BigUint = numerators.iter().sum();
        if sum != denominator {
            return Err(Error::SumMismatch {
                sum: sum.to_string(),
                denominator: denominator.to_string(),
            });
        }
        Ok(Self::reduced(numerators, denominator))
    }

    pub fn from_u64(numerators: &[u64], denominator: u64) -> Result<Self> {
        Self::new(
            numerators.iter().map(|&n| BigUint::from(n)).collect(),
            BigUint::from(denominator),
        )
    }

    /// Normalizes arbitrary nonnegative integer weights (not all zero).
    pub fn from_weights(weights: &[u64]) -> Result<Self> {
        let total: u64 = weights.iter().sum();
        Self::from_u64(weights, total)
    }

    // Caller guarantees sum == denominator > 0.
    fn reduced(mut numerators: Vec<BigUint>, mut denominator: BigUint) -> Self {
        let g = numerators
            .iter()
            .fold(denominator.clone(), |acc, n| acc.gcd(n));
        if !g.is_one() {
            for n in &mut numerators {
                *n /= &g;
            }
            denominator /= &g;
        }
        Self {
            numerators,
            denominator,
        }
    }

    pub fn uniform(d: usize) -> Self {
        Self::reduced(vec![BigUint::one(); d], BigUint::from(d))
    }

    pub fn point_mass(d: usize, outcome: Outcome) -> Self {
        let mut numerators = vec![BigUint::zero(); d];
        numerators[outcome.zero_based()] = BigUint::one();
        Self {
            numerators,
            denominator: BigUint::one(),
        }
    }

    pub fn dim(&self) -> usize {
        self.numerators.len()
    }

    pub fn numerators(&self) -> &[BigUint] {
        &self.numerators
    }

    pub fn denominator(&self) -> &BigUint {
        &self.denominator
    }

    /// Exact value of coordinate `i` (0-based).
    pub fn coord(&self, i: usize) -> BigRational {
        BigRational::new(
            BigInt::from(self.numerators[i].clone()),
            BigInt::from(self.denominator.clone()),
        )
    }

    pub fn coord_f64(&self, i: usize) -> f64 {
        ratio_to_f64(&self.coord(i))
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.coord_f64(i)).collect()
    }

    pub fn is_full_support(&self) -> bool {
        self.numerators.iter().all(|n| !n.is_zero())
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }
}

impl fmt::Debug for RationalDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, n) in self.numerators.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ")/{}", self.denominator)
    }
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact `Σ_i |a_i − b_i|`.
pub fn l1_distance_exact(a: &RationalDist, b: &RationalDist) -> Result<BigRational> {
    a.check_dim(b)?;
    let mut total = BigUint::zero();
    for (na, nb) in a.numerators.iter().zip(&b.numerators) {
        let x = na * &b.denominator;
        let y = nb * &a.denominator;
        total += if x >= y { x - y } else { y - x };
    }
    Ok(BigRational::new(
        BigInt::from(total),
        BigInt::from(&a.denominator * &b.denominator),
    ))
}

pub fn l1_distance(a: &RationalDist, b: &RationalDist) -> Result<f64> {
    l1_distance_exact(a, b).map(|r| ratio_to_f64(&r))
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(a: &RationalDist) -> f64 {
    a.to_f64_vec()
        .into_iter()
        .filter(|&x| x > 0.0)
        .map(|x| -x * x.ln())
        .sum()
}

/// `KL(x ‖ p)` in nats; terms with `x_i = 0` are dropped.
pub fn kl_divergence(x: &RationalDist, p: &RationalDist) -> Result<f64> {
    x.check_dim(p)?;
    let mut total = 0.0;
    for i in 0..x.dim() {
        if x.numerators[i].is_zero() {
            continue;
        }
        if p.numerators[i].is_zero() {
            return Err(Error::AbsoluteContinuityViolation(i + 1));
        }
        // ratio x_i/p_i formed exactly before taking the log
        let ratio = BigRational::new(
            BigInt::from(&x.numerators[i] * &p.denominator),
            BigInt::from(&p.numerators[i] * &x.denominator),
        );
        total += x.coord_f64(i) * ratio_to_f64(&ratio).ln();
    }
    Ok(total.max(0.0))
}

/// `⟨x, ln(1/p)⟩`, the cross-entropy of `x` against `p`.
pub fn cross_entropy(x: &RationalDist, p: &RationalDist) -> Result<f64> {
    x.check_dim(p)?;
    let mut total = 0.0;
    for i in 0..x.dim() {
        if x.numerators[i].is_zero() {
            continue;
        }
        if p.numerators[i].is_zero() {
            return Err(Error::AbsoluteContinuityViolation(i + 1));
        }
        total -= x.coord_f64(i) * p.coord_f64(i).ln();
    }
    Ok(total)
}

/// A realized outcome, 1-based index into `[d]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Outcome(u32);

impl Outcome {
    pub fn new(index: usize, d: usize) -> Result<Self> {
        if index == 0 || index > d {
            return Err(Error::InvalidOutcome { index, d });
        }
        Ok(Self(index as u32))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn zero_based(self) -> usize {
        self.0 as usize - 1
    }
}

/// Grouping key for exact prediction values. Since [`RationalDist`] is always
/// canonical, two keys are equal iff their simplex points are equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredictionKey(RationalDist);

impl PredictionKey {
    pub fn dist(&self) -> &RationalDist {
        &self.0
    }
}

pub fn canonical_key(a: &RationalDist) -> PredictionKey {
    PredictionKey(a.clone())
}

/// Dense handle into a [`KeyTable`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KeyId(pub u32);

/// Interner for prediction keys, so per-day records carry a `u32`
/// instead of a vector of big integers.
#[derive(Clone, Debug, Default)]
pub struct KeyTable {
    dists: Vec<RationalDist>,
    index: HashMap<PredictionKey, KeyId>,
}

impl KeyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, dist: &RationalDist) -> KeyId {
        let key = canonical_key(dist);
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        let id = KeyId(self.dists.len() as u32);
        self.dists.push(dist.clone());
        self.index.insert(key, id);
        id
    }

    pub fn lookup(&self, dist: &RationalDist) -> Option<KeyId> {
        self.index.get(&canonical_key(dist)).copied()
    }

    pub fn get(&self, id: KeyId) -> &RationalDist {
        &self.dists[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.dists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dists.is_empty()
    }
}

/// Exact inverse-CDF sampler over the coordinates of a [`RationalDist`].
#[derive(Clone, Debug)]
pub struct DiscreteSampler {
    cumulative: Cumulative,
}

#[derive(Clone, Debug)]
enum Cumulative {
    Small { bounds: Vec<u64>, total: u64 },
    Big { bounds: Vec<BigUint>, total: BigUint },
}

impl DiscreteSampler {
    pub fn new(p: &RationalDist) -> Self {
        let small = p.denominator.to_u64().and_then(|total| {
            let mut acc = 0u64;
            let bounds = p
                .numerators
                .iter()
                .map(|n| {
                    acc += n.to_u64()?;
                    Some(acc)
                })
                .collect::<Option<Vec<_>>>()?;
            Some(Cumulative::Small { bounds, total })
        });
        let cumulative = small.unwrap_or_else(|| {
            let mut acc = BigUint::zero();
            let bounds = p
                .numerators
                .iter()
                .map(|n| {
                    acc += n;
                    acc.clone()
                })
                .collect();
            Cumulative::Big {
                bounds,
                total: p.denominator.clone(),
            }
        });
        Self { cumulative }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Outcome {
        let i = match &self.cumulative {
            Cumulative::Small { bounds, total } => {
                let u = rng.gen_range(0..*total);
                bounds.partition_point(|&b| b <= u)
            }
            Cumulative::Big { bounds, total } => {
                let u = rng.gen_biguint_below(total);
                bounds.partition_point(|b| *b <= u)
            }
        };
        Outcome(i as u32 + 1)
    }
}

/// Draws `i` with probability `p_i`.
pub fn sample_outcome<R: Rng + ?Sized>(p: &RationalDist, rng: &mut R) -> Outcome {
    DiscreteSampler::new(p).sample(rng)
}

// JSON form: `[[n_1, ..., n_d], den]`. Integers that do not fit in u64 are
// written as decimal strings.

struct BigNum<'a>(&'a BigUint);

impl Serialize for BigNum<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0.to_u64() {
            Some(v) => s.serialize_u64(v),
            None => s.serialize_str(&self.0.to_string()),
        }
    }
}

struct Numerators<'a>(&'a [BigUint]);

impl Serialize for Numerators<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.len()))?;
        for n in self.0 {
            seq.serialize_element(&BigNum(n))?;
        }
        seq.end()
    }
}

impl Serialize for RationalDist {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(2)?;
        t.serialize_element(&Numerators(&self.numerators))?;
        t.serialize_element(&BigNum(&self.denominator))?;
        t.end()
    }
}

struct OwnedBigNum(BigUint);

impl<'de> Deserialize<'de> for OwnedBigNum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = OwnedBigNum;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a nonnegative integer or decimal string")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Self::Value, E> {
                Ok(OwnedBigNum(BigUint::from(v)))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Self::Value, E> {
                u64::try_from(v)
                    .map(|v| OwnedBigNum(BigUint::from(v)))
                    .map_err(|_| E::custom("negative integer"))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
                v.parse::<BigUint>()
                    .map(OwnedBigNum)
                    .map_err(|_| E::custom(format!("bad integer {v:?}")))
            }
        }
        d.deserialize_any(V)
    }
}

impl<'de> Deserialize<'de> for RationalDist {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = RationalDist;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("[[numerators...], denominator]")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Self::Value, A::Error> {
                let nums: Vec<OwnedBigNum> = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let den: OwnedBigNum = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(1, &self))?;
                RationalDist::new(nums.into_iter().map(|n| n.0).collect(), den.0)
                    .map_err(de::Error::custom)
            }
        }
        d.deserialize_seq(V)
    }
}
