//! Pathwise certificates for a finished hierarchical run.
//!
//! Everything here is recomputed from the outcome sequence and the forecaster
//! config alone. Each inequality of the bound chain is checked on the realized
//! path and reported with its measured value, bound and margin.

use std::io::Write;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecaster::{smoothed_prediction, ForecastConfig, MixtureRecord, Mode};
use crate::metrics::dce_exact;
use crate::simplex::{
    cross_entropy, entropy, kl_divergence, l1_distance_exact, ratio_to_f64, Outcome, RationalDist, FLOAT_TOL,
};
use crate::transcript::Transcript;

/// Statistics of one level-ℓ interval `Γ_{h_1..h_ℓ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalStats {
    pub level: usize,
    /// `(h_1, ..., h_ℓ)`, 1-based.
    pub path: Vec<u64>,
    /// Empirical outcome average over the interval.
    pub average: RationalDist,
    /// The level-ℓ prediction played throughout the interval.
    pub prediction: RationalDist,
    /// The prediction the level would play at iteration `h_ℓ + 1`.
    pub successor: RationalDist,
}

/// Interval statistics for every level of a completed run.
#[derive(Clone, Debug)]
pub struct RunStats {
    cfg: ForecastConfig,
    global: RationalDist,
    /// `levels[ℓ-1][j]` is the j-th level-ℓ interval in time order.
    levels: Vec<Vec<IntervalStats>>,
}

fn path_of(mut index: u64, level: usize, h: u64) -> Vec<u64> {
    let mut path = vec![0; level];
    for slot in path.iter_mut().rev() {
        *slot = index % h + 1;
        index /= h;
    }
    path
}

impl RunStats {
    pub fn from_outcomes(cfg: &ForecastConfig, outcomes: &[Outcome]) -> Result<Self> {
        cfg.validate()?;
        let horizon = cfg.horizon();
        if outcomes.len() as u64 != horizon {
            return Err(Error::InvalidArgument(format!(
                "run has {} outcomes, config needs T = {horizon}",
                outcomes.len()
            )));
        }
        let d = cfg.d;
        let h = cfg.iterations;
        // counts[ℓ] holds H^ℓ rows of d counts
        let mut counts: Vec<Vec<u64>> = vec![Vec::new(); cfg.levels + 1];
        let leaves = (horizon / cfg.base_len) as usize;
        counts[cfg.levels] = vec![0; leaves * d];
        for (i, x) in outcomes.iter().enumerate() {
            if x.index() > d {
                return Err(Error::InvalidOutcome { index: x.index(), d });
            }
            let leaf = i / cfg.base_len as usize;
            counts[cfg.levels][leaf * d + x.zero_based()] += 1;
        }
        for level in (0..cfg.levels).rev() {
            let below = &counts[level + 1];
            let mut row = vec![0; below.len() / h as usize];
            for (j, chunk) in below.chunks(d).enumerate() {
                let parent = j / h as usize;
                for (i, c) in chunk.iter().enumerate() {
                    row[parent * d + i] += c;
                }
            }
            counts[level] = row;
        }
        let global = RationalDist::from_u64(&counts[0], horizon)?;
        let mut levels = Vec::with_capacity(cfg.levels);
        for (level, rows) in counts.iter().enumerate().skip(1) {
            let len = cfg.level_len(level);
            let mut nodes = Vec::with_capacity(rows.len() / d);
            let mut prefix = vec![0u64; d];
            for (j, chunk) in rows.chunks(d).enumerate() {
                let iteration = j as u64 % h + 1;
                if iteration == 1 {
                    prefix.iter_mut().for_each(|c| *c = 0);
                }
                let prediction = smoothed_prediction(&prefix, iteration, len, cfg.m);
                prefix.iter_mut().zip(chunk).for_each(|(p, c)| *p += c);
                let successor = smoothed_prediction(&prefix, iteration + 1, len, cfg.m);
                nodes.push(IntervalStats {
                    level,
                    path: path_of(j as u64, level, h),
                    average: RationalDist::from_u64(chunk, len)?,
                    prediction,
                    successor,
                });
            }
            levels.push(nodes);
        }
        Ok(Self {
            cfg: *cfg,
            global,
            levels,
        })
    }

    pub fn config(&self) -> &ForecastConfig {
        &self.cfg
    }

    /// Outcome average over the whole run.
    pub fn global(&self) -> &RationalDist {
        &self.global
    }

    pub fn level(&self, level: usize) -> &[IntervalStats] {
        &self.levels[level - 1]
    }

    pub fn node(&self, path: &[u64]) -> Result<&IntervalStats> {
        if path.is_empty() {
            return Err(Error::InvalidArgument("the whole run has no interval record; see `global`".into()));
        }
        let index = self.index_of(path)?;
        Ok(&self.levels[path.len() - 1][index])
    }

    fn index_of(&self, path: &[u64]) -> Result<usize> {
        if path.len() > self.cfg.levels {
            return Err(Error::OutOfRange {
                what: "level",
                value: path.len() as u64,
                range: format!("[0, {}]", self.cfg.levels),
            });
        }
        let h = self.cfg.iterations;
        let mut index = 0u64;
        for &step in path {
            if step < 1 || step > h {
                return Err(Error::OutOfRange {
                    what: "iteration",
                    value: step,
                    range: format!("[1, {h}]"),
                });
            }
            index = index * h + step - 1;
        }
        Ok(index as usize)
    }

    /// The H children of the interval at `parent` (empty path = whole run).
    fn children(&self, parent: &[u64]) -> Result<&[IntervalStats]> {
        let index = self.index_of(parent)?;
        if parent.len() >= self.cfg.levels {
            return Err(Error::InvalidArgument("leaf intervals have no children".into()));
        }
        let h = self.cfg.iterations as usize;
        Ok(&self.levels[parent.len()][index * h..(index + 1) * h])
    }

    fn parent_average(&self, parent: &[u64]) -> Result<&RationalDist> {
        if parent.is_empty() {
            Ok(&self.global)
        } else {
            Ok(&self.node(parent)?.average)
        }
    }
}

/// Step sizes `‖p_h − p_{h+1}‖₁` on one level.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothnessReport {
    pub level: usize,
    pub steps: usize,
    pub max_gap: f64,
    /// `min_h (2/(h+m) − ‖p_h − p_{h+1}‖₁)`.
    pub min_margin: f64,
}

pub fn check_smoothness(stats: &RunStats) -> Result<Vec<SmoothnessReport>> {
    let m = stats.cfg.m;
    let mut out = Vec::with_capacity(stats.cfg.levels);
    for level in 1..=stats.cfg.levels {
        let mut max_gap = BigRational::zero();
        let mut min_margin: Option<BigRational> = None;
        let nodes = stats.level(level);
        for node in nodes {
            let h = *node.path.last().expect("level >= 1");
            let gap = l1_distance_exact(&node.prediction, &node.successor)?;
            let margin = BigRational::new(BigInt::from(2), BigInt::from(h + m)) - &gap;
            if gap > max_gap {
                max_gap = gap;
            }
            if min_margin.as_ref().is_none_or(|b| margin < *b) {
                min_margin = Some(margin);
            }
        }
        out.push(SmoothnessReport {
            level,
            steps: nodes.len(),
            max_gap: ratio_to_f64(&max_gap),
            min_margin: min_margin.map(|v| ratio_to_f64(&v)).unwrap_or(0.0),
        });
    }
    Ok(out)
}

/// Cross-entropy regret of the successor predictions inside one parent
/// interval, against the closed-form bound.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoRegret {
    /// `Σ_h ⟨X_h, ln 1/p_{h+1}⟩` over the H children.
    pub lhs: f64,
    /// Exact integral bound on the left-hand side.
    pub tight_bound: f64,
    /// `H·Ent(X_parent) + H/m²`.
    pub paper_bound: f64,
    /// Whether `tight_bound ≤ paper_bound`, i.e. the simpler bound is implied.
    pub paper_applicable: bool,
    pub pass: bool,
}

fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Checks the pseudo-regret bound for the children of `parent`, a level-(ℓ-1)
/// path (empty for the whole run).
pub fn check_pseudo_regret(stats: &RunStats, parent: &[u64]) -> Result<PseudoRegret> {
    let children = stats.children(parent)?;
    let avg = stats.parent_average(parent)?;
    let d = stats.cfg.d as f64;
    let h = stats.cfg.iterations as f64;
    let m = stats.cfg.m as f64;
    let mut lhs = 0.0;
    for child in children {
        lhs += cross_entropy(&child.average, &child.successor)?;
    }
    let a = m / d;
    let mut tight = xlnx(h + 1.0 + m) - xlnx(1.0 + m) - h;
    for w in avg.to_f64_vec() {
        let w = h * w;
        tight += -xlnx(w + a) + xlnx(a) + w;
    }
    let paper = h * entropy(avg) + h / (m * m);
    Ok(PseudoRegret {
        lhs,
        tight_bound: tight,
        paper_bound: paper,
        paper_applicable: tight <= paper,
        pass: within(tight - lhs, tight),
    })
}

/// Entropy telescoping across levels.
#[derive(Clone, Debug, PartialEq)]
pub struct Telescope {
    /// `(1/L) Σ_ℓ H^{-ℓ} Σ_{h<ℓ} [H·Ent(X_{h<ℓ}) − Σ_h Ent(X_{h≤ℓ})]`.
    pub lhs: f64,
    /// `(1/L) [Ent(X̄) − H^{-L} Σ_{leaves} Ent(X_leaf)]`.
    pub rhs: f64,
    pub residual: f64,
}

pub fn check_telescope(stats: &RunStats) -> Result<Telescope> {
    let cfg = &stats.cfg;
    let h = cfg.iterations as f64;
    let levels = cfg.levels as f64;
    let mut lhs = 0.0;
    let mut scale = 1.0;
    for level in 1..=cfg.levels {
        scale /= h;
        let mut sum = 0.0;
        for_each_parent(cfg, level, |parent| {
            let children = stats.children(parent)?;
            sum += h * entropy(stats.parent_average(parent)?);
            sum -= children.iter().map(|c| entropy(&c.average)).sum::<f64>();
            Ok(())
        })?;
        lhs += scale * sum;
    }
    lhs /= levels;
    let leaves: f64 = stats.level(cfg.levels).iter().map(|n| entropy(&n.average)).sum();
    let rhs = (entropy(&stats.global) - scale * leaves) / levels;
    Ok(Telescope {
        lhs,
        rhs,
        residual: lhs - rhs,
    })
}

/// Calls `f` with every level-(ℓ-1) path in time order.
fn for_each_parent(cfg: &ForecastConfig, level: usize, mut f: impl FnMut(&[u64]) -> Result<()>) -> Result<()> {
    let count = cfg.iterations.pow((level - 1) as u32);
    for j in 0..count {
        f(&path_of(j, level - 1, cfg.iterations))?;
    }
    Ok(())
}

fn within(margin: f64, scale: f64) -> bool {
    margin >= -FLOAT_TOL * scale.abs().max(1.0)
}

/// One row of a certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub scope: String,
    pub measured: f64,
    pub bound: f64,
    pub margin: f64,
    pub pass: bool,
}

impl CheckRecord {
    /// `measured ≤ bound`, with a relative float tolerance.
    fn upper(name: &str, scope: impl Into<String>, measured: f64, bound: f64) -> Self {
        let margin = bound - measured;
        Self {
            name: name.into(),
            scope: scope.into(),
            measured,
            bound,
            margin,
            pass: within(margin, bound),
        }
    }

    /// An exact inequality `lo ≤ hi` between rationals.
    fn exact(name: &str, scope: &str, lo: &BigRational, hi: &BigRational) -> Self {
        Self {
            name: name.into(),
            scope: scope.into(),
            measured: ratio_to_f64(lo),
            bound: ratio_to_f64(hi),
            margin: ratio_to_f64(&(hi - lo)),
            pass: lo <= hi,
        }
    }

    /// An identity that should hold up to float error.
    fn identity(name: &str, scope: &str, residual: f64) -> Self {
        Self {
            name: name.into(),
            scope: scope.into(),
            measured: residual,
            bound: 0.0,
            margin: -residual.abs(),
            pass: residual.abs() <= FLOAT_TOL,
        }
    }

    /// A count of violations that must be zero.
    fn count(name: &str, violations: u64, checked: u64) -> Self {
        Self {
            name: name.into(),
            scope: format!("{checked} days"),
            measured: violations as f64,
            bound: 0.0,
            margin: 0.0 - violations as f64,
            pass: violations == 0,
        }
    }
}

/// The bound chain `A0 ≤ A1 ≤ A2 ≤ A3` on the realized path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainValues {
    /// The run's distributional calibration error.
    #[serde(rename = "A0")]
    pub a0: f64,
    /// `(1/L) Σ_ℓ Σ T_ℓ ‖p_{h≤ℓ} − X_{h≤ℓ}‖₁`.
    #[serde(rename = "A1")]
    pub a1: f64,
    /// `(1/L) Σ_ℓ Σ T_ℓ ‖p_{h<ℓ,h_ℓ+1} − X_{h≤ℓ}‖₁ + 2εT`.
    #[serde(rename = "A2")]
    pub a2: f64,
    /// `T·sqrt(2K̄) + 2εT`.
    #[serde(rename = "A3")]
    pub a3: f64,
    /// `(1/L) Σ_ℓ H^{-ℓ} Σ KL(X_{h≤ℓ} ‖ p_{h<ℓ,h_ℓ+1})`.
    #[serde(rename = "K_bar")]
    pub k_bar: f64,
    pub telescope_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub run_id: String,
    pub checks: Vec<CheckRecord>,
    pub chain: ChainValues,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Flat view: one row per check, then the chain values as `value` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["name", "scope", "measured", "bound", "margin", "pass"])?;
        for c in &self.checks {
            w.write_record([
                c.name.clone(),
                c.scope.clone(),
                c.measured.to_string(),
                c.bound.to_string(),
                c.margin.to_string(),
                c.pass.to_string(),
            ])?;
        }
        let ch = &self.chain;
        for (name, v) in [
            ("A0", ch.a0),
            ("A1", ch.a1),
            ("A2", ch.a2),
            ("A3", ch.a3),
            ("K_bar", ch.k_bar),
            ("telescope_residual", ch.telescope_residual),
        ] {
            w.write_record(["value", name, &v.to_string(), "", "", ""])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Recomputes the expected mixture of every day from the outcome history and
/// compares it by value with the transcript. Returns the number of
/// mismatching days.
fn recomputation_mismatches(stats: &RunStats, tr: &Transcript) -> Result<u64> {
    let cfg = &stats.cfg;
    let leaves = stats.level(cfg.levels).len();
    let mut mismatches = 0;
    for leaf in 0..leaves {
        let mut entries = Vec::with_capacity(cfg.levels);
        for level in 1..=cfg.levels {
            let index = leaf / cfg.iterations.pow((cfg.levels - level) as u32) as usize;
            match tr.keys.lookup(&stats.level(level)[index].prediction) {
                Some(key) => entries.push((key, 1)),
                None => break,
            }
        }
        let expected = if entries.len() == cfg.levels {
            Some(MixtureRecord::new(entries, cfg.levels as u64)?)
        } else {
            None
        };
        let start = leaf * cfg.base_len as usize;
        let days = &tr.days[start..start + cfg.base_len as usize];
        let mut last: Option<&std::sync::Arc<MixtureRecord>> = None;
        for day in days {
            // consecutive days usually share one record
            if last.is_some_and(|prev| std::sync::Arc::ptr_eq(prev, &day.mixture)) {
                continue;
            }
            let ok = expected.as_ref().is_some_and(|e| *e == *day.mixture);
            if ok {
                last = Some(&day.mixture);
            } else {
                mismatches += 1;
                last = None;
            }
        }
    }
    Ok(mismatches)
}

/// Runs every check against a transcript produced by the hierarchical
/// forecaster. Fails with an error only when the transcript cannot be
/// interpreted at all; violated inequalities show up as failing rows.
pub fn certify(tr: &Transcript) -> Result<CertificateReport> {
    let cfg = tr
        .header
        .config
        .ok_or_else(|| Error::ConfigInvalid("transcript has no forecaster config".into()))?;
    if cfg.d != tr.d() {
        return Err(Error::DimensionMismatch {
            left: cfg.d,
            right: tr.d(),
        });
    }
    let stats = RunStats::from_outcomes(&cfg, &tr.outcomes())?;
    let mut checks = Vec::new();

    let days = tr.horizon();
    checks.push(CheckRecord::count(
        "recomputation",
        recomputation_mismatches(&stats, tr)?,
        days,
    ));
    if tr.header.mode == Mode::Sampled {
        let mut bad = 0;
        for day in &tr.days {
            match day.realized {
                Some(k) if day.mixture.entries.iter().any(|e| e.key == k && e.weight > 0) => {}
                _ => bad += 1,
            }
        }
        checks.push(CheckRecord::count("realized_in_support", bad, days));
    }
    if tr.days.iter().any(|day| day.adversary.is_some()) {
        let bad = tr
            .days
            .iter()
            .filter(|day| {
                day.adversary
                    .is_some_and(|k| tr.keys.get(k).numerators()[day.outcome.zero_based()].is_zero())
            })
            .count() as u64;
        checks.push(CheckRecord::count("outcome_in_support", bad, days));
    }

    let m = cfg.m as f64;
    for row in check_smoothness(&stats)? {
        let bound = 2.0 / m;
        checks.push(CheckRecord {
            name: "smoothness".into(),
            scope: format!("level {}", row.level),
            measured: row.max_gap,
            bound,
            margin: row.min_margin,
            pass: row.min_margin >= 0.0,
        });
    }

    // pseudo-regret per parent interval, collecting the correction terms
    let h = cfg.iterations as f64;
    let levels = cfg.levels as f64;
    let mut corrections = 0.0;
    let mut paper_regime = true;
    let mut scale = 1.0;
    for level in 1..=cfg.levels {
        scale /= h;
        let mut sum = 0.0;
        for_each_parent(&cfg, level, |parent| {
            let r = check_pseudo_regret(&stats, parent)?;
            let scope = format!("level {level} parent {parent:?}");
            checks.push(CheckRecord::upper("pseudo_regret", scope.clone(), r.lhs, r.tight_bound));
            if r.paper_applicable {
                checks.push(CheckRecord::upper("pseudo_regret_simple", scope, r.lhs, r.paper_bound));
            }
            let ent = entropy(stats.parent_average(parent)?);
            let correction = r.tight_bound - h * ent;
            paper_regime &= correction <= h / (m * m);
            sum += correction;
            Ok(())
        })?;
        corrections += scale * sum;
    }
    corrections /= levels;

    let telescope = check_telescope(&stats)?;
    checks.push(CheckRecord::identity("telescope", "all levels", telescope.residual));

    // chain quantities
    let horizon = cfg.horizon();
    let mut a1 = BigRational::zero();
    let mut a2 = BigRational::zero();
    let mut k_bar = 0.0;
    let mut scale = 1.0;
    for level in 1..=cfg.levels {
        scale /= h;
        let len = BigRational::from_integer(BigInt::from(cfg.level_len(level)));
        let mut kl = 0.0;
        for node in stats.level(level) {
            a1 += &len * l1_distance_exact(&node.prediction, &node.average)?;
            a2 += &len * l1_distance_exact(&node.successor, &node.average)?;
            kl += kl_divergence(&node.average, &node.successor)?;
        }
        k_bar += scale * kl;
    }
    k_bar /= levels;
    let l = BigRational::from_integer(BigInt::from(cfg.levels));
    let smoothing = BigRational::new(BigInt::from(2 * horizon), BigInt::from(cfg.m));
    a1 /= &l;
    a2 = a2 / &l + &smoothing;
    let a0 = dce_exact(tr)?;
    let t = horizon as f64;
    let a3 = t * (2.0 * k_bar).sqrt() + ratio_to_f64(&smoothing);
    let a2_f = ratio_to_f64(&a2);
    checks.push(CheckRecord::exact("chain", "A0 <= A1", &a0, &a1));
    checks.push(CheckRecord::exact("chain", "A1 <= A2", &a1, &a2));
    checks.push(CheckRecord::upper("chain", "A2 <= A3", a2_f, a3));

    let ln_d = (cfg.d as f64).ln();
    checks.push(CheckRecord::upper("kl_budget", "K_bar <= ln(d)/L + C_bar", k_bar, ln_d / levels + corrections));
    if paper_regime {
        let budget = ln_d / levels + 1.0 / (m * m);
        checks.push(CheckRecord::upper("kl_budget_simple", "K_bar <= ln(d)/L + 1/m^2", k_bar, budget));
        if levels >= ln_d * m * m {
            let bound = 4.0 * t / m;
            checks.push(CheckRecord::upper("final_bound", "A3 <= 4 eps T", a3, bound));
        }
    }

    Ok(CertificateReport {
        run_id: tr.header.run_id.clone(),
        checks,
        chain: ChainValues {
            a0: ratio_to_f64(&a0),
            a1: ratio_to_f64(&a1),
            a2: a2_f,
            a3,
            k_bar,
            telescope_residual: telescope.residual,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o(i: usize, d: usize) -> Outcome {
        Outcome::new(i, d).unwrap()
    }

    #[test]
    fn hand_pseudo_regret() {
        // d=2, H=2, m=1, S=1, L=1: children are (1,0) then (0,1)
        let cfg = ForecastConfig::new(2, 1, 2, 1, 1).unwrap();
        let stats = RunStats::from_outcomes(&cfg, &[o(1, 2), o(2, 2)]).unwrap();
        let r = check_pseudo_regret(&stats, &[]).unwrap();
        assert!((r.lhs - 0.9808292530117262).abs() < 1e-12);
        assert!((r.tight_bound - 2.249340578475233).abs() < 1e-12);
        assert!((r.paper_bound - (2.0 * 2f64.ln() + 2.0)).abs() < 1e-12);
        assert!(r.paper_applicable && r.pass);
    }

    #[test]
    fn node_layout() {
        let cfg = ForecastConfig::new(2, 2, 2, 1, 1).unwrap();
        let xs = [o(1, 2), o(1, 2), o(2, 2), o(1, 2)];
        let stats = RunStats::from_outcomes(&cfg, &xs).unwrap();
        assert_eq!(stats.global(), &RationalDist::from_u64(&[3, 1], 4).unwrap());
        let node = stats.node(&[2]).unwrap();
        assert_eq!(node.average, RationalDist::uniform(2));
        // level 1, h=2 after (1,1): (2·2 + 1·2)/(2·2·2) = 6/8 for coord 1
        assert_eq!(node.prediction, RationalDist::from_u64(&[6, 2], 8).unwrap());
        let leaf = stats.node(&[2, 2]).unwrap();
        assert_eq!(leaf.path, vec![2, 2]);
        assert_eq!(leaf.prediction, RationalDist::from_u64(&[1, 3], 4).unwrap());
        assert!(stats.node(&[3]).is_err());
    }

    #[test]
    fn telescope_is_an_identity() {
        let cfg = ForecastConfig::new(3, 3, 2, 2, 2).unwrap();
        let xs: Vec<_> = (0..cfg.horizon()).map(|t| o((t * 7 % 5 % 3) as usize + 1, 3)).collect();
        let stats = RunStats::from_outcomes(&cfg, &xs).unwrap();
        let tel = check_telescope(&stats).unwrap();
        assert!(tel.residual.abs() < 1e-12, "{tel:?}");
    }

    #[test]
    fn smoothness_rows() {
        let cfg = ForecastConfig::new(2, 2, 4, 1, 2).unwrap();
        let xs: Vec<_> = (0..cfg.horizon()).map(|t| o(if t % 3 == 0 { 1 } else { 2 }, 2)).collect();
        let stats = RunStats::from_outcomes(&cfg, &xs).unwrap();
        let rows = check_smoothness(&stats).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.min_margin >= 0.0 && r.max_gap <= 1.0));
        assert_eq!(rows[1].steps, 16);
    }

    #[test]
    fn outcome_count_must_match() {
        let cfg = ForecastConfig::new(2, 1, 2, 1, 1).unwrap();
        assert!(RunStats::from_outcomes(&cfg, &[o(1, 2)]).is_err());
    }
}
