//! Flat `key = value` run configs.
//!
//! ```text
//! # comments start with '#'
//! d = 2
//! L = 2
//! H = 2
//! S = 1
//! m = 1
//! mode = sampled
//! adversary = iid
//! q = 1,1
//! ```
//!
//! Instead of `L`, `H`, `S`, `m` a config may give `epsilon`, which selects
//! the coupled parameters. `adversary` is one of `iid` (with `q`, integer
//! weights or `uniform`), `adaptive_argmin`, or `hard` (with `R`, `K`).

use std::collections::BTreeMap;
use std::path::Path;

use crate::adversary::{adaptive_argmin_adversary, iid_adversary, Adversary, HardSeqConfig, HardSequence};
use crate::error::{Error, Result};
use crate::forecaster::{paper_parameters, ForecastConfig, Mode, DEFAULT_DAY_BUDGET};
use crate::rng::{stream, Role};
use crate::simplex::RationalDist;

const KEYS: &[&str] = &[
    "d", "L", "H", "S", "m", "epsilon", "mode", "seed", "adversary", "q", "R", "K", "trials", "budget",
    "record_adversary",
];

#[derive(Clone, Debug, PartialEq)]
pub enum AdversarySpec {
    Iid(RationalDist),
    AdaptiveArgmin,
    Hard(HardSeqConfig),
}

impl AdversarySpec {
    pub fn name(&self) -> String {
        match self {
            AdversarySpec::Iid(_) => "iid".into(),
            AdversarySpec::AdaptiveArgmin => "adaptive_argmin".into(),
            AdversarySpec::Hard(c) => format!("hard(R={},K={})", c.levels, c.blocks),
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, AdversarySpec::AdaptiveArgmin)
    }

    /// A fresh adversary for one trial. The hard sequence draws its tau tree
    /// from the trial's own stream.
    pub fn build(&self, seed: u64, trial: u64) -> Box<dyn Adversary> {
        match self {
            AdversarySpec::Iid(q) => Box::new(iid_adversary(q.clone())),
            AdversarySpec::AdaptiveArgmin => Box::new(adaptive_argmin_adversary()),
            AdversarySpec::Hard(cfg) => {
                let tree = crate::adversary::sample_tau_tree(cfg, &mut stream(seed, Role::Tau, trial));
                Box::new(HardSequence::new(tree))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub forecast: ForecastConfig,
    pub mode: Mode,
    pub seed: Option<u64>,
    pub adversary: AdversarySpec,
    /// Trajectories used for the ECE estimate.
    pub trials: usize,
    pub budget: u64,
    /// Record each day's outcome law in the transcript.
    pub record_adversary: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw = parse_pairs(text)?;
        let get = |k: &str| raw.get(k).map(String::as_str);
        let int = |k: &str| -> Result<Option<u64>> {
            get(k)
                .map(|v| {
                    v.parse::<u64>()
                        .map_err(|_| Error::ConfigInvalid(format!("{k} = {v:?} is not a nonnegative integer")))
                })
                .transpose()
        };
        let budget = int("budget")?.unwrap_or(DEFAULT_DAY_BUDGET);

        let adversary_name = get("adversary").unwrap_or("iid");
        let hard = match adversary_name {
            "hard" => {
                let r = int("R")?.ok_or_else(|| Error::ConfigInvalid("hard adversary needs R".into()))?;
                let k = int("K")?.ok_or_else(|| Error::ConfigInvalid("hard adversary needs K".into()))?;
                Some(HardSeqConfig::new(to_u32("R", r)?, to_u32("K", k)?)?)
            }
            _ => {
                if get("R").is_some() || get("K").is_some() {
                    return Err(Error::ConfigInvalid("R and K only apply to the hard adversary".into()));
                }
                None
            }
        };

        let d = int("d")?.ok_or_else(|| Error::ConfigInvalid("missing d".into()))? as usize;
        let forecast = match get("epsilon") {
            Some(eps) => {
                if ["L", "H", "S", "m"].iter().any(|k| get(k).is_some()) {
                    return Err(Error::ConfigInvalid("give either epsilon or L, H, S, m".into()));
                }
                let eps: f64 = eps
                    .parse()
                    .map_err(|_| Error::ConfigInvalid(format!("epsilon = {eps:?} is not a number")))?;
                paper_parameters(d, eps, budget)?
            }
            None => {
                let need = |k: &str| int(k)?.ok_or_else(|| Error::ConfigInvalid(format!("missing {k}")));
                ForecastConfig::new(d, need("L")? as usize, need("H")?, need("S")?, need("m")?)?
            }
        };
        forecast.check_budget(budget)?;

        let adversary = match adversary_name {
            "iid" => AdversarySpec::Iid(parse_law(get("q").unwrap_or("uniform"), d)?),
            "adaptive_argmin" => AdversarySpec::AdaptiveArgmin,
            "hard" => {
                let cfg = hard.expect("parsed above");
                if cfg.d() != d || cfg.horizon() != forecast.horizon() {
                    return Err(Error::ConfigInvalid(format!(
                        "hard sequence has d = {}, T = {}; forecaster has d = {d}, T = {}",
                        cfg.d(),
                        cfg.horizon(),
                        forecast.horizon()
                    )));
                }
                AdversarySpec::Hard(cfg)
            }
            other => return Err(Error::ConfigInvalid(format!("unknown adversary {other:?}"))),
        };
        if get("q").is_some() && !matches!(adversary, AdversarySpec::Iid(_)) {
            return Err(Error::ConfigInvalid("q only applies to the iid adversary".into()));
        }

        let mode = get("mode").map(str::parse).transpose()?.unwrap_or(Mode::Distributional);
        let trials = int("trials")?.unwrap_or(4) as usize;
        if trials < 2 {
            return Err(Error::ConfigInvalid("trials must be >= 2".into()));
        }
        let record_adversary = match get("record_adversary") {
            None | Some("false") => false,
            Some("true") => true,
            Some(v) => return Err(Error::ConfigInvalid(format!("record_adversary = {v:?} is not a boolean"))),
        };
        Ok(Self {
            forecast,
            mode,
            seed: int("seed")?,
            adversary,
            trials,
            budget,
            record_adversary,
        })
    }
}

fn to_u32(key: &str, v: u64) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::ConfigInvalid(format!("{key} = {v} is too large")))
}

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::ConfigInvalid(format!("line {}: expected key = value", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(Error::ConfigInvalid(format!("line {}: unknown key {k:?}", n + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::ConfigInvalid(format!("line {}: duplicate key {k:?}", n + 1)));
        }
    }
    Ok(out)
}

/// `uniform` or comma-separated integer weights, normalized.
pub fn parse_law(text: &str, d: usize) -> Result<RationalDist> {
    if text == "uniform" {
        return Ok(RationalDist::uniform(d));
    }
    let weights = text
        .split(',')
        .map(|w| {
            w.trim()
                .parse::<u64>()
                .map_err(|_| Error::ConfigInvalid(format!("q weight {w:?} is not an integer")))
        })
        .collect::<Result<Vec<_>>>()?;
    if weights.len() != d {
        return Err(Error::ConfigInvalid(format!("q has {} weights, d = {d}", weights.len())));
    }
    RationalDist::from_weights(&weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_small_config() {
        let cfg = RunConfig::parse("d = 2\nL=2\nH = 2\nS = 1\nm = 1 # smoothing\nq = 1,3\nmode = sampled\n").unwrap();
        assert_eq!(cfg.forecast, ForecastConfig::new(2, 2, 2, 1, 1).unwrap());
        assert_eq!(cfg.mode, Mode::Sampled);
        assert_eq!(cfg.adversary, AdversarySpec::Iid(RationalDist::from_u64(&[1, 3], 4).unwrap()));
        assert_eq!(cfg.seed, None);
    }

    #[test]
    fn epsilon_selects_coupled_parameters() {
        let cfg = RunConfig::parse("d = 2\nepsilon = 0.5\n").unwrap();
        assert_eq!(cfg.forecast.horizon(), 2_097_152);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "L = 1\nH = 2\nS = 1\nm = 1",
            "d = 2\nL = 1\nH = 2\nS = 1\nm = 1\ncolour = red",
            "d = 2\nL = 1\nH = 2\nS = 1",
            "d = 2\nL = 1\nH = 2\nS = 1\nm = 1\nadversary = hard\nR = 2\nK = 2",
            "d = 2\nL = 1\nH = 2\nS = 1\nm = 1\nq = 1,2,3",
            "d = 2\nL = 1\nH = 2\nS = 1\nm = 1\ntrials = 1",
            "d = 2\nL = 3\nH = 16\nS = 64\nm = 1\nbudget = 1000",
        ] {
            assert!(matches!(
                RunConfig::parse(text),
                Err(Error::ConfigInvalid(_) | Error::BudgetExceeded { .. })
            ), "{text}");
        }
    }

    #[test]
    fn hard_adversary_must_match_forecaster() {
        let cfg = RunConfig::parse("d = 8\nL = 1\nH = 2\nS = 1\nm = 1\nadversary = hard\nR = 2\nK = 2").unwrap();
        assert_eq!(cfg.adversary.name(), "hard(R=2,K=2)");
    }
}
