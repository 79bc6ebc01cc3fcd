//! Outcome-law generators: the recursive hard sequence, a fixed i.i.d. law,
//! and an adaptive adversary that plays against the current mixture.
//!
//! Hard-sequence layout, with `d = R²K`: outcome block `D_r` holds
//! coordinates `(r-1)·RK + 1 ..= r·RK` and sub-block `D_{r,k}` holds
//! `(r-1)·RK + (k-1)·R + 1 ..= (r-1)·RK + k·R`. Day `t` is the tuple
//! `(k_1, ..., k_{R-1}) ∈ [K]^(R-1)` in lexicographic order; its law puts
//! `1/R` on coordinate `(r-1)·RK + (k_r-1)·R + τ(k_1..k_r)` for each
//! `r < R` and spreads the remaining `1/R` uniformly over `D_R`.

use std::io::Write;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecaster::MixtureRecord;
use crate::simplex::{KeyId, KeyTable, Outcome, RationalDist};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardSeqConfig {
    #[serde(rename = "R")]
    pub levels: u32,
    #[serde(rename = "K")]
    pub blocks: u32,
}

impl HardSeqConfig {
    pub fn new(levels: u32, blocks: u32) -> Result<Self> {
        if levels < 2 {
            return Err(Error::ConfigInvalid(format!("R must be >= 2, got {levels}")));
        }
        if blocks < 1 {
            return Err(Error::ConfigInvalid("K must be >= 1".into()));
        }
        let cfg = Self { levels, blocks };
        let horizon = (blocks as u64).checked_pow(levels - 1);
        let d = (levels as u64).checked_pow(2).and_then(|r2| r2.checked_mul(blocks as u64));
        if horizon.is_none() || d.is_none() || d.unwrap() > u32::MAX as u64 {
            return Err(Error::ConfigInvalid(format!("R={levels}, K={blocks} too large")));
        }
        Ok(cfg)
    }

    /// `d = R²·K`.
    pub fn d(&self) -> usize {
        (self.levels * self.levels * self.blocks) as usize
    }

    /// `T = K^(R-1)`.
    pub fn horizon(&self) -> u64 {
        (self.blocks as u64).pow(self.levels - 1)
    }

    /// `|D_r| = d/R`.
    pub fn block_len(&self) -> usize {
        (self.levels * self.blocks) as usize
    }

    /// Coordinates of `D_r` (1-based).
    pub fn block(&self, r: u32) -> std::ops::RangeInclusive<usize> {
        let len = self.block_len();
        let lo = (r as usize - 1) * len + 1;
        lo..=lo + len - 1
    }

    /// Coordinates of `D_{r,k}` (1-based).
    pub fn sub_block(&self, r: u32, k: u32) -> std::ops::RangeInclusive<usize> {
        let lo = (r as usize - 1) * self.block_len() + (k as usize - 1) * self.levels as usize + 1;
        lo..=lo + self.levels as usize - 1
    }

    /// One-hot coordinate for level `r`, sub-block `k`, offset `j ∈ [R]`.
    pub fn one_hot_index(&self, r: u32, k: u32, j: u32) -> usize {
        (r as usize - 1) * self.block_len() + (k as usize - 1) * self.levels as usize + j as usize
    }
}

/// Error parameters `ε_r = R^(-6(R-r+1))`, `r ∈ [R]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsSchedule {
    levels: u32,
}

impl EpsSchedule {
    pub fn new(cfg: &HardSeqConfig) -> Self {
        Self { levels: cfg.levels }
    }

    pub fn eps(&self, r: u32) -> f64 {
        assert!((1..=self.levels).contains(&r));
        (self.levels as f64).powi(-6 * (self.levels - r + 1) as i32)
    }

    pub fn values(&self) -> Vec<f64> {
        (1..=self.levels).map(|r| self.eps(r)).collect()
    }
}

/// Random offsets `τ(k_1..k_r) ∈ [R]` for every prefix of length `r < R`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TauTree {
    cfg: HardSeqConfig,
    // levels[r-1][rank of (k_1..k_r)], k_1 most significant
    levels: Vec<Vec<u32>>,
}

impl TauTree {
    pub fn config(&self) -> &HardSeqConfig {
        &self.cfg
    }

    /// Total number of prefixes, `Σ_{r=1}^{R-1} K^r`.
    pub fn len(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, prefix: &[u32]) -> Result<u32> {
        let r = prefix.len();
        let missing = || Error::MissingTauEntry(prefix.to_vec());
        if r == 0 || prefix.iter().any(|&k| k < 1 || k > self.cfg.blocks) {
            return Err(missing());
        }
        let rank = prefix
            .iter()
            .fold(0usize, |acc, &k| acc * self.cfg.blocks as usize + (k as usize - 1));
        self.levels
            .get(r - 1)
            .and_then(|level| level.get(rank))
            .copied()
            .ok_or_else(missing)
    }

    /// All `(prefix, τ)` pairs, shortest prefixes first.
    pub fn entries(&self) -> Vec<(Vec<u32>, u32)> {
        let k = self.cfg.blocks as u64;
        let mut out = Vec::with_capacity(self.len());
        for (i, level) in self.levels.iter().enumerate() {
            let r = i as u32 + 1;
            for (rank, &tau) in level.iter().enumerate() {
                out.push((digits(rank as u64, k, r), tau));
            }
        }
        out
    }

    pub fn from_entries(cfg: HardSeqConfig, entries: &[(Vec<u32>, u32)]) -> Result<Self> {
        let k = cfg.blocks as usize;
        let mut levels: Vec<Vec<u32>> = (1..cfg.levels).map(|r| vec![0; k.pow(r)]).collect();
        for (prefix, tau) in entries {
            let r = prefix.len();
            if r == 0 || r >= cfg.levels as usize || *tau < 1 || *tau > cfg.levels {
                return Err(Error::InvalidArgument(format!("bad tau entry {prefix:?} -> {tau}")));
            }
            if prefix.iter().any(|&x| x < 1 || x as usize > k) {
                return Err(Error::InvalidArgument(format!("bad tau prefix {prefix:?}")));
            }
            let rank = prefix.iter().fold(0usize, |acc, &x| acc * k + (x as usize - 1));
            levels[r - 1][rank] = *tau;
        }
        if let Some(pos) = levels.iter().flatten().position(|&t| t == 0) {
            return Err(Error::InvalidArgument(format!("tau tree missing entry #{pos}")));
        }
        Ok(Self { cfg, levels })
    }
}

// base-`k` digits of `rank` as `width` 1-based entries, most significant first
fn digits(mut rank: u64, k: u64, width: u32) -> Vec<u32> {
    let mut out = vec![1u32; width as usize];
    for slot in out.iter_mut().rev() {
        *slot = (rank % k) as u32 + 1;
        rank /= k;
    }
    out
}

pub fn sample_tau_tree<R: Rng + ?Sized>(cfg: &HardSeqConfig, rng: &mut R) -> TauTree {
    let levels = (1..cfg.levels)
        .map(|r| {
            (0..(cfg.blocks as usize).pow(r))
                .map(|_| rng.gen_range(1..=cfg.levels))
                .collect()
        })
        .collect();
    TauTree { cfg: *cfg, levels }
}

pub fn day_tuple(t: u64, cfg: &HardSeqConfig) -> Result<Vec<u32>> {
    let horizon = cfg.horizon();
    if t < 1 || t > horizon {
        return Err(Error::OutOfRange {
            what: "day",
            value: t,
            range: format!("[1, {horizon}]"),
        });
    }
    Ok(digits(t - 1, cfg.blocks as u64, cfg.levels - 1))
}

pub fn day_of_tuple(tuple: &[u32], cfg: &HardSeqConfig) -> Result<u64> {
    if tuple.len() != cfg.levels as usize - 1 || tuple.iter().any(|&k| k < 1 || k > cfg.blocks) {
        return Err(Error::InvalidArgument(format!("{tuple:?} is not in [K]^(R-1)")));
    }
    Ok(tuple
        .iter()
        .fold(0u64, |acc, &k| acc * cfg.blocks as u64 + (k as u64 - 1))
        + 1)
}

/// The day-`t` outcome law of the hard sequence.
pub fn day_distribution(tree: &TauTree, t: u64, cfg: &HardSeqConfig) -> Result<RationalDist> {
    let tuple = day_tuple(t, cfg)?;
    let d = cfg.d();
    let mut numerators = vec![BigUint::zero(); d];
    let one_hot_mass = BigUint::from(cfg.block_len());
    for r in 1..cfg.levels {
        let tau = tree.get(&tuple[..r as usize])?;
        if tau > cfg.levels {
            return Err(Error::MissingTauEntry(tuple[..r as usize].to_vec()));
        }
        let i = cfg.one_hot_index(r, tuple[r as usize - 1], tau);
        numerators[i - 1] += &one_hot_mass;
    }
    for i in cfg.block(cfg.levels) {
        numerators[i - 1] += 1u32;
    }
    RationalDist::new(numerators, BigUint::from(d))
}

/// Writes the hard sequence as JSONL: one header line, then one line per day.
pub fn write_hard_sequence<W: Write>(out: &mut W, tree: &TauTree, seed: u64) -> Result<()> {
    let cfg = *tree.config();
    #[derive(Serialize)]
    struct Header {
        #[serde(rename = "R")]
        r: u32,
        #[serde(rename = "K")]
        k: u32,
        d: usize,
        #[serde(rename = "T")]
        t: u64,
        seed: u64,
    }
    #[derive(Serialize)]
    struct Day<'a> {
        t: u64,
        tuple: &'a [u32],
        dist: &'a RationalDist,
    }
    serde_json::to_writer(
        &mut *out,
        &Header {
            r: cfg.levels,
            k: cfg.blocks,
            d: cfg.d(),
            t: cfg.horizon(),
            seed,
        },
    )?;
    writeln!(out)?;
    for t in 1..=cfg.horizon() {
        let tuple = day_tuple(t, &cfg)?;
        let dist = day_distribution(tree, t, &cfg)?;
        serde_json::to_writer(
            &mut *out,
            &Day {
                t,
                tuple: &tuple,
                dist: &dist,
            },
        )?;
        writeln!(out)?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct TauTreeJson {
    #[serde(rename = "R")]
    r: u32,
    #[serde(rename = "K")]
    k: u32,
    entries: Vec<(Vec<u32>, u32)>,
}

pub fn tau_tree_to_json(tree: &TauTree) -> Result<String> {
    Ok(serde_json::to_string(&TauTreeJson {
        r: tree.cfg.levels,
        k: tree.cfg.blocks,
        entries: tree.entries(),
    })?)
}

pub fn tau_tree_from_json(text: &str) -> Result<TauTree> {
    let raw: TauTreeJson = serde_json::from_str(text)?;
    TauTree::from_entries(HardSeqConfig::new(raw.r, raw.k)?, &raw.entries)
}

/// What an adversary may look at when choosing day `t`'s outcome law.
pub struct AdversaryView<'a> {
    pub t: u64,
    /// Realized predictions of days `1..t` (None in distributional runs).
    pub past_predictions: &'a [Option<KeyId>],
    pub past_outcomes: &'a [Outcome],
    /// Day-`t` mixture; only provided to adaptive adversaries.
    pub mixture: Option<&'a Arc<MixtureRecord>>,
    pub keys: &'a KeyTable,
}

pub trait Adversary: Send {
    fn name(&self) -> String;

    /// Adaptive adversaries choose after seeing the day's mixture; oblivious
    /// ones choose first and their law may be revealed to the forecaster.
    fn is_adaptive(&self) -> bool;

    fn next(&mut self, view: &AdversaryView<'_>) -> Result<Arc<RationalDist>>;
}

#[derive(Clone, Debug)]
pub struct IidAdversary {
    law: Arc<RationalDist>,
}

pub fn iid_adversary(q: RationalDist) -> IidAdversary {
    IidAdversary { law: Arc::new(q) }
}

impl Adversary for IidAdversary {
    fn name(&self) -> String {
        "iid".into()
    }

    fn is_adaptive(&self) -> bool {
        false
    }

    fn next(&mut self, _view: &AdversaryView<'_>) -> Result<Arc<RationalDist>> {
        Ok(Arc::clone(&self.law))
    }
}

/// Puts all mass on the outcome the mixture expects least,
/// `argmin_i Σ_p μ_t(p)·p(i)`, smallest index on ties.
#[derive(Clone, Debug, Default)]
pub struct AdaptiveArgmin {
    cache: Option<(Arc<MixtureRecord>, Arc<RationalDist>)>,
}

pub fn adaptive_argmin_adversary() -> AdaptiveArgmin {
    AdaptiveArgmin::default()
}

/// Index (1-based) minimizing the mixture's expected mass.
pub fn argmin_expected_mass(mixture: &MixtureRecord, keys: &KeyTable) -> Result<Outcome> {
    let first = mixture
        .entries
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?;
    let d = keys.get(first.key).dim();
    let mut best: Option<(BigRational, usize)> = None;
    for i in 0..d {
        let mut mass = BigRational::zero();
        for e in &mixture.entries {
            let p = keys.get(e.key);
            if p.dim() != d {
                return Err(Error::DimensionMismatch {
                    left: d,
                    right: p.dim(),
                });
            }
            mass += p.coord(i) * BigRational::new(BigInt::from(e.weight), BigInt::from(mixture.denominator));
        }
        if best.as_ref().is_none_or(|(b, _)| mass < *b) {
            best = Some((mass, i));
        }
    }
    Outcome::new(best.expect("d >= 1").1 + 1, d)
}

impl Adversary for AdaptiveArgmin {
    fn name(&self) -> String {
        "adaptive_argmin".into()
    }

    fn is_adaptive(&self) -> bool {
        true
    }

    fn next(&mut self, view: &AdversaryView<'_>) -> Result<Arc<RationalDist>> {
        let mixture = view
            .mixture
            .ok_or_else(|| Error::InvalidArgument("adaptive adversary needs the day's mixture".into()))?;
        if let Some((seen, law)) = &self.cache {
            if Arc::ptr_eq(seen, mixture) || **seen == **mixture {
                return Ok(Arc::clone(law));
            }
        }
        let target = argmin_expected_mass(mixture, view.keys)?;
        let d = view.keys.get(mixture.entries[0].key).dim();
        let law = Arc::new(RationalDist::point_mass(d, target));
        self.cache = Some((Arc::clone(mixture), Arc::clone(&law)));
        Ok(law)
    }
}

/// The oblivious hard sequence as a protocol adversary.
#[derive(Clone, Debug)]
pub struct HardSequence {
    tree: TauTree,
}

impl HardSequence {
    pub fn new(tree: TauTree) -> Self {
        Self { tree }
    }

    pub fn tree(&self) -> &TauTree {
        &self.tree
    }
}

impl Adversary for HardSequence {
    fn name(&self) -> String {
        format!("hard(R={},K={})", self.tree.cfg.levels, self.tree.cfg.blocks)
    }

    fn is_adaptive(&self) -> bool {
        false
    }

    fn next(&mut self, view: &AdversaryView<'_>) -> Result<Arc<RationalDist>> {
        let cfg = self.tree.cfg;
        day_distribution(&self.tree, view.t, &cfg).map(Arc::new)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Role};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(r: u32, k: u32) -> HardSeqConfig {
        HardSeqConfig::new(r, k).unwrap()
    }

    #[test]
    fn tau_tree_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_tau_tree(&cfg(2, 2), &mut rng).len(), 2);
        assert_eq!(sample_tau_tree(&cfg(3, 2), &mut rng).len(), 6);
        let tree = sample_tau_tree(&cfg(3, 3), &mut rng);
        assert_eq!(tree.len(), 3 + 9);
        assert!(tree.entries().iter().all(|(_, tau)| (1..=3).contains(tau)));
    }

    #[test]
    fn tau_frequencies_are_uniform() {
        let c = cfg(3, 1);
        let n = 10_000u64;
        let mut counts = [0u64; 3];
        for seed in 0..n {
            let mut rng = stream(seed, Role::Tau, 0);
            let tree = sample_tau_tree(&c, &mut rng);
            counts[tree.get(&[1]).unwrap() as usize - 1] += 1;
        }
        let sigma = (n as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for x in counts {
            assert!((x as f64 - n as f64 / 3.0).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn day_tuples() {
        assert_eq!(day_tuple(1, &cfg(4, 3)).unwrap(), vec![1, 1, 1]);
        assert_eq!(day_tuple(3, &cfg(3, 2)).unwrap(), vec![2, 1]);
        let c = cfg(3, 3);
        for t in 1..=c.horizon() {
            assert_eq!(day_of_tuple(&day_tuple(t, &c).unwrap(), &c).unwrap(), t);
        }
        assert!(matches!(day_tuple(5, &cfg(3, 2)), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn hard_day_distribution_example() {
        let c = cfg(2, 2);
        let tree = TauTree::from_entries(c, &[(vec![1], 2), (vec![2], 1)]).unwrap();
        let p = day_distribution(&tree, 1, &c).unwrap();
        assert_eq!(p.dim(), 8);
        let expect = RationalDist::from_u64(&[0, 4, 0, 0, 1, 1, 1, 1], 8).unwrap();
        assert_eq!(p, expect);
    }

    #[test]
    fn missing_tau_entry() {
        let small = cfg(2, 2);
        let tree = TauTree::from_entries(small, &[(vec![1], 2), (vec![2], 1)]).unwrap();
        assert!(matches!(
            day_distribution(&tree, 3, &cfg(3, 2)),
            Err(Error::MissingTauEntry(_))
        ));
    }

    #[test]
    fn one_hots_stay_inside_sub_blocks() {
        for r in 2..=3 {
            for k in 1..=3 {
                let c = cfg(r, k);
                let mut rng = ChaCha8Rng::seed_from_u64(u64::from(r * 10 + k));
                let tree = sample_tau_tree(&c, &mut rng);
                for t in 1..=c.horizon() {
                    let tuple = day_tuple(t, &c).unwrap();
                    let p = day_distribution(&tree, t, &c).unwrap();
                    for level in 1..r {
                        let inside = c.sub_block(level, tuple[level as usize - 1]);
                        for i in c.block(level) {
                            let positive = !p.numerators()[i - 1].is_zero();
                            assert_eq!(positive, inside.contains(&i) && {
                                let tau = tree.get(&tuple[..level as usize]).unwrap();
                                i == c.one_hot_index(level, tuple[level as usize - 1], tau)
                            });
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn tau_tree_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tree = sample_tau_tree(&cfg(3, 2), &mut rng);
        let back = tau_tree_from_json(&tau_tree_to_json(&tree).unwrap()).unwrap();
        assert_eq!(back, tree);
    }

    #[test]
    fn hard_sequence_export() {
        let c = cfg(2, 2);
        let tree = TauTree::from_entries(c, &[(vec![1], 2), (vec![2], 1)]).unwrap();
        let mut buf = Vec::new();
        write_hard_sequence(&mut buf, &tree, 5).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], r#"{"R":2,"K":2,"d":8,"T":2,"seed":5}"#);
        assert_eq!(lines[1], r#"{"t":1,"tuple":[1],"dist":[[0,4,0,0,1,1,1,1],8]}"#);
        assert_eq!(lines[2], r#"{"t":2,"tuple":[2],"dist":[[0,0,4,0,1,1,1,1],8]}"#);
    }

    #[test]
    fn eps_schedule() {
        let s = EpsSchedule::new(&cfg(2, 2));
        assert_eq!(s.eps(1), 2f64.powi(-12));
        assert_eq!(s.eps(2), 2f64.powi(-6));
        let s = EpsSchedule::new(&cfg(4, 1));
        let v = s.values();
        assert!(v.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*v.last().unwrap(), 4f64.powi(-6));
    }

    fn view<'a>(keys: &'a KeyTable, mix: &'a Arc<MixtureRecord>) -> AdversaryView<'a> {
        AdversaryView {
            t: 1,
            past_predictions: &[],
            past_outcomes: &[],
            mixture: Some(mix),
            keys,
        }
    }

    #[test]
    fn iid_is_constant() {
        let q = RationalDist::from_u64(&[1, 3], 4).unwrap();
        let mut adv = iid_adversary(q.clone());
        let keys = KeyTable::new();
        for t in 1..5 {
            let v = AdversaryView {
                t,
                past_predictions: &[],
                past_outcomes: &[],
                mixture: None,
                keys: &keys,
            };
            assert_eq!(*adv.next(&v).unwrap(), q);
        }
    }

    #[test]
    fn argmin_examples() {
        let mut keys = KeyTable::new();
        let p = keys.intern(&RationalDist::from_u64(&[7, 3], 10).unwrap());
        let mix = Arc::new(MixtureRecord::point_mass(p));
        let mut adv = adaptive_argmin_adversary();
        let law = adv.next(&view(&keys, &mix)).unwrap();
        assert_eq!(*law, RationalDist::from_u64(&[0, 1], 1).unwrap());

        let u = keys.intern(&RationalDist::uniform(2));
        let mix = Arc::new(MixtureRecord::point_mass(u));
        let law = adv.next(&view(&keys, &mix)).unwrap();
        assert_eq!(*law, RationalDist::from_u64(&[1, 0], 1).unwrap());
    }
}
