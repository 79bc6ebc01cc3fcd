//! The L-level hierarchical forecaster.
//!
//! Level `ℓ` splits the horizon into `H^(ℓ-1)` intervals of `H` iterations,
//! each iteration `T_ℓ = S·H^(L-ℓ)` days long. During iteration `h` of an
//! interval the level plays the smoothed empirical frequency of the outcomes
//! seen in iterations `1..h` of that interval:
//!
//! ```text
//! Y = (Σ counts + m·T_ℓ·unif) / ((h - 1 + m)·T_ℓ)
//! ```
//!
//! The day's prediction distribution puts mass `1/L` on each level's current
//! prediction.

use std::sync::Arc;

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{KeyId, KeyTable, Outcome, RationalDist};

/// Default cap on run length, in days.
pub const DEFAULT_DAY_BUDGET: u64 = 1 << 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForecastConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub levels: usize,
    #[serde(rename = "H")]
    pub iterations: u64,
    #[serde(rename = "S")]
    pub base_len: u64,
    pub m: u64,
}

impl ForecastConfig {
    pub fn new(d: usize, levels: usize, iterations: u64, base_len: u64, m: u64) -> Result<Self> {
        let cfg = Self {
            d,
            levels,
            iterations,
            base_len,
            m,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigInvalid(msg));
        if self.d < 2 {
            return bad(format!("d must be >= 2, got {}", self.d));
        }
        if self.levels < 1 {
            return bad("L must be >= 1".into());
        }
        if self.iterations < 2 {
            return bad(format!("H must be >= 2, got {}", self.iterations));
        }
        if self.base_len < 1 {
            return bad("S must be >= 1".into());
        }
        if self.m < 1 {
            return bad("m must be >= 1".into());
        }
        if self.horizon_checked().is_none() {
            return Err(Error::Overflow(self.horizon_big().to_string(), u64::MAX));
        }
        Ok(())
    }

    fn horizon_checked(&self) -> Option<u64> {
        let mut t = self.base_len;
        for _ in 0..self.levels {
            t = t.checked_mul(self.iterations)?;
        }
        // d·(H+m)·T must also fit for the u64 fast paths downstream
        t.checked_mul(self.d as u64)?
            .checked_mul(self.iterations.checked_add(self.m)?)?;
        Some(t)
    }

    pub fn horizon_big(&self) -> BigUint {
        BigUint::from(self.base_len) * BigUint::from(self.iterations).pow(self.levels as u32)
    }

    /// `T = S·H^L`.
    pub fn horizon(&self) -> u64 {
        self.level_len(0)
    }

    /// `T_ℓ = S·H^(L-ℓ)`; `T_0 = T` and `T_L = S`.
    pub fn level_len(&self, level: usize) -> u64 {
        assert!(level <= self.levels);
        self.base_len * self.iterations.pow((self.levels - level) as u32)
    }

    /// Smoothing parameter `ε = 1/m`.
    pub fn epsilon(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn check_budget(&self, budget: u64) -> Result<()> {
        let days = self.horizon();
        if days > budget {
            return Err(Error::BudgetExceeded { days, budget });
        }
        Ok(())
    }
}

/// The coupled parameter choice: `m = ⌈1/ε⌉`, `H = m⁴`, `L = ⌈ln(d)·m²⌉`,
/// `S = d³·m⁶`.
pub fn paper_parameters(d: usize, epsilon: f64, budget: u64) -> Result<ForecastConfig> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::ConfigInvalid(format!("epsilon must lie in (0,1), got {epsilon}")));
    }
    if d < 2 {
        return Err(Error::ConfigInvalid(format!("d must be >= 2, got {d}")));
    }
    let m = (1.0 / epsilon).ceil() as u64;
    let iterations = m.pow(4);
    let levels = ((d as f64).ln() * (m * m) as f64).ceil() as usize;
    let base_len = (d as u64).pow(3) * m.pow(6);
    let cfg = ForecastConfig {
        d,
        levels,
        iterations,
        base_len,
        m,
    };
    if iterations < 2 {
        return Err(Error::ConfigInvalid(format!("H = {iterations} < 2 (epsilon too large)")));
    }
    let horizon = cfg.horizon_big();
    if horizon > BigUint::from(budget) {
        return Err(Error::Overflow(horizon.to_string(), budget));
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `(h_1, ..., h_ℓ)` with `t ∈ Γ_{h_1..h_ℓ}`, via `h_r = ⌊(t-1)/T_r⌋ mod H + 1`.
pub fn interval_of(t: u64, level: usize, cfg: &ForecastConfig) -> Result<Vec<u64>> {
    let horizon = cfg.horizon();
    if t < 1 || t > horizon {
        return Err(Error::OutOfRange {
            what: "day",
            value: t,
            range: format!("[1, {horizon}]"),
        });
    }
    if level < 1 || level > cfg.levels {
        return Err(Error::OutOfRange {
            what: "level",
            value: level as u64,
            range: format!("[1, {}]", cfg.levels),
        });
    }
    Ok((1..=level)
        .map(|r| ((t - 1) / cfg.level_len(r)) % cfg.iterations + 1)
        .collect())
}

/// Smoothed empirical frequency: numerators `d·C_i + m·T_ℓ` over
/// `d·(h-1+m)·T_ℓ`. Valid for any `h ≥ 1`, including the never-played
/// successor `h = H+1`.
pub fn smoothed_prediction(counts: &[u64], iteration: u64, level_len: u64, m: u64) -> RationalDist {
    let d = BigUint::from(counts.len());
    let pseudo = BigUint::from(m) * level_len;
    let numerators = counts
        .iter()
        .map(|&c| &d * c + &pseudo)
        .collect::<Vec<_>>();
    let denominator = d * (iteration - 1 + m) * level_len;
    RationalDist::new(numerators, denominator).expect("counts must sum to (h-1)·T_ℓ")
}

/// Per-level bookkeeping inside the current enclosing interval.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelState {
    pub level: usize,
    /// Outcome counts since the start of the enclosing level-(ℓ-1) interval.
    pub counts: Vec<u64>,
    /// Current iteration `h_ℓ ∈ [H]`.
    pub iteration: u64,
    pub prediction: RationalDist,
}

impl LevelState {
    fn fresh(level: usize, d: usize) -> Self {
        Self {
            level,
            counts: vec![0; d],
            iteration: 1,
            prediction: RationalDist::uniform(d),
        }
    }

    /// Rebuilds the state in effect on day `t` from the raw outcome history
    /// (`history[i]` is the outcome of day `i+1`; at least `t-1` entries).
    pub fn from_history(cfg: &ForecastConfig, level: usize, t: u64, history: &[Outcome]) -> Result<Self> {
        interval_of(t, level, cfg)?;
        let enclosing = cfg.level_len(level - 1);
        let len = cfg.level_len(level);
        let start = (t - 1) / enclosing * enclosing;
        let iteration = (t - 1 - start) / len + 1;
        let end = start + (iteration - 1) * len;
        if (history.len() as u64) < end {
            return Err(Error::InvalidArgument(format!(
                "history has {} days, need {end}",
                history.len()
            )));
        }
        let mut counts = vec![0u64; cfg.d];
        for x in &history[start as usize..end as usize] {
            counts[x.zero_based()] += 1;
        }
        let mut state = Self {
            level,
            counts,
            iteration,
            prediction: RationalDist::uniform(cfg.d),
        };
        state.prediction = predict_level(&state, cfg)?;
        Ok(state)
    }
}

pub fn predict_level(state: &LevelState, cfg: &ForecastConfig) -> Result<RationalDist> {
    let len = cfg.level_len(state.level);
    let sum: u64 = state.counts.iter().sum();
    let expected = (state.iteration - 1) * len;
    if sum != expected || state.counts.len() != cfg.d || state.iteration < 1 {
        return Err(Error::InconsistentCounts {
            level: state.level,
            sum,
            expected,
        });
    }
    Ok(smoothed_prediction(&state.counts, state.iteration, len, cfg.m))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MixtureEntry {
    pub key: KeyId,
    /// Weight numerator over [`MixtureRecord::denominator`].
    pub weight: u64,
}

/// One day's prediction distribution μ_t, with exact rational weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MixtureRecord {
    pub entries: Vec<MixtureEntry>,
    pub denominator: u64,
}

impl MixtureRecord {
    /// Merges duplicate keys and drops zero weights; entries end up sorted by key.
    pub fn new(entries: impl IntoIterator<Item = (KeyId, u64)>, denominator: u64) -> Result<Self> {
        let mut merged: Vec<MixtureEntry> = Vec::new();
        let mut raw: Vec<(KeyId, u64)> = entries.into_iter().filter(|e| e.1 > 0).collect();
        raw.sort_by_key(|e| e.0);
        for (key, weight) in raw {
            match merged.last_mut() {
                Some(last) if last.key == key => last.weight += weight,
                _ => merged.push(MixtureEntry { key, weight }),
            }
        }
        let total: u64 = merged.iter().map(|e| e.weight).sum();
        if denominator == 0 || total != denominator {
            return Err(Error::InvalidArgument(format!(
                "mixture weights sum to {total}/{denominator}, expected 1"
            )));
        }
        Ok(Self {
            entries: merged,
            denominator,
        })
    }

    pub fn point_mass(key: KeyId) -> Self {
        Self {
            entries: vec![MixtureEntry { key, weight: 1 }],
            denominator: 1,
        }
    }

    pub fn weight_of(&self, key: KeyId) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.key == key)
            .map(|e| e.weight as f64 / self.denominator as f64)
            .sum()
    }

    pub fn is_normalized(&self) -> bool {
        self.denominator > 0 && self.entries.iter().map(|e| e.weight).sum::<u64>() == self.denominator
    }
}

/// Draws a key with probability equal to its weight.
pub fn sample_prediction<R: Rng + ?Sized>(mixture: &MixtureRecord, rng: &mut R) -> KeyId {
    let mut u = rng.gen_range(0..mixture.denominator);
    for e in &mixture.entries {
        if u < e.weight {
            return e.key;
        }
        u -= e.weight;
    }
    unreachable!("mixture weights do not sum to the denominator")
}

/// Something that publishes a prediction distribution each day and then
/// learns the outcome.
pub trait Forecaster {
    fn name(&self) -> String;

    /// μ_t for day `t`. `outcome_law` is the day's outcome distribution when
    /// the protocol reveals it in advance (oblivious hard sequence).
    fn mixture(&mut self, t: u64, keys: &mut KeyTable, outcome_law: Option<&RationalDist>) -> Result<Arc<MixtureRecord>>;

    fn observe(&mut self, t: u64, outcome: Outcome) -> Result<()>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Record μ_t only.
    Distributional,
    /// Also draw and record a realized prediction each day.
    Sampled,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distributional" => Ok(Mode::Distributional),
            "sampled" => Ok(Mode::Sampled),
            other => Err(Error::ConfigInvalid(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct HierarchicalForecaster {
    cfg: ForecastConfig,
    levels: Vec<LevelState>,
    next_day: u64,
    cached: Option<Arc<MixtureRecord>>,
}

impl HierarchicalForecaster {
    pub fn new(cfg: ForecastConfig) -> Self {
        let levels = (1..=cfg.levels).map(|l| LevelState::fresh(l, cfg.d)).collect();
        Self {
            cfg,
            levels,
            next_day: 1,
            cached: None,
        }
    }

    pub fn config(&self) -> &ForecastConfig {
        &self.cfg
    }

    pub fn levels(&self) -> &[LevelState] {
        &self.levels
    }

    pub fn next_day(&self) -> u64 {
        self.next_day
    }
}

impl Forecaster for HierarchicalForecaster {
    fn name(&self) -> String {
        "hierarchical".into()
    }

    fn mixture(&mut self, t: u64, keys: &mut KeyTable, _outcome_law: Option<&RationalDist>) -> Result<Arc<MixtureRecord>> {
        if t != self.next_day {
            return Err(Error::OutOfOrderDay {
                expected: self.next_day,
                got: t,
            });
        }
        if let Some(m) = &self.cached {
            return Ok(Arc::clone(m));
        }
        let entries = self
            .levels
            .iter()
            .map(|s| (keys.intern(&s.prediction), 1))
            .collect::<Vec<_>>();
        let mixture = Arc::new(MixtureRecord::new(entries, self.cfg.levels as u64)?);
        self.cached = Some(Arc::clone(&mixture));
        Ok(mixture)
    }

    fn observe(&mut self, t: u64, outcome: Outcome) -> Result<()> {
        if t != self.next_day || t > self.cfg.horizon() {
            return Err(Error::OutOfOrderDay {
                expected: self.next_day,
                got: t,
            });
        }
        if outcome.index() > self.cfg.d {
            return Err(Error::InvalidOutcome {
                index: outcome.index(),
                d: self.cfg.d,
            });
        }
        for level in 1..=self.cfg.levels {
            let len = self.cfg.level_len(level);
            let enclosing = self.cfg.level_len(level - 1);
            let state = &mut self.levels[level - 1];
            state.counts[outcome.zero_based()] += 1;
            if !t.is_multiple_of(len) {
                continue;
            }
            if t.is_multiple_of(enclosing) {
                state.counts.iter_mut().for_each(|c| *c = 0);
                state.iteration = 1;
            } else {
                state.iteration += 1;
            }
            state.prediction = predict_level(state, &self.cfg)?;
            self.cached = None;
        }
        self.next_day += 1;
        Ok(())
    }
}
