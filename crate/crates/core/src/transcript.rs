//! Per-day run records and their JSONL form.
//!
//! Line 1 is a header object (`"kind": "header"`) carrying the run config,
//! seed and PRNG name. Every following line is one day:
//!
//! ```text
//! {"t":3,"mixture":[{"p":[[1,1],2],"w":[1,2]},{"p":[[2,1],3],"w":[1,2]}],"pred":[[1,1],2],"x":1,"adv":[[1,1],2]}
//! ```
//!
//! `pred` (realized prediction) and `adv` (the adversary's outcome law) are
//! omitted when not recorded.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecaster::{ForecastConfig, MixtureRecord, Mode};
use crate::simplex::{KeyId, KeyTable, Outcome, RationalDist};

pub const TRANSCRIPT_FORMAT: &str = "hicalib-transcript/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub run_id: String,
    pub seed: u64,
    pub prng: String,
    pub d: usize,
    /// Forecaster parameters, when the run used the hierarchical forecaster.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ForecastConfig>,
    pub mode: Mode,
    pub adversary: String,
    #[serde(rename = "T")]
    pub days: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DayRecord {
    pub mixture: Arc<MixtureRecord>,
    pub realized: Option<KeyId>,
    pub outcome: Outcome,
    pub adversary: Option<KeyId>,
}

#[derive(Clone, Debug)]
pub struct Transcript {
    pub header: RunHeader,
    pub keys: KeyTable,
    pub days: Vec<DayRecord>,
}

impl Transcript {
    pub fn new(header: RunHeader) -> Self {
        Self {
            header,
            keys: KeyTable::new(),
            days: Vec::new(),
        }
    }

    /// A bare transcript over `[d]` for hand-built cases.
    pub fn blank(d: usize) -> Self {
        Self::new(RunHeader {
            run_id: "adhoc".into(),
            seed: 0,
            prng: String::new(),
            d,
            config: None,
            mode: Mode::Distributional,
            adversary: "none".into(),
            days: 0,
        })
    }

    pub fn d(&self) -> usize {
        self.header.d
    }

    pub fn horizon(&self) -> u64 {
        self.days.len() as u64
    }

    pub fn outcomes(&self) -> Vec<Outcome> {
        self.days.iter().map(|r| r.outcome).collect()
    }

    /// Appends a day given explicit `(prediction, weight numerator)` pairs.
    pub fn push_day(
        &mut self,
        mixture: &[(RationalDist, u64)],
        denominator: u64,
        outcome: Outcome,
        realized: Option<&RationalDist>,
    ) -> Result<()> {
        let entries = mixture
            .iter()
            .map(|(p, w)| self.check_dim(p).map(|_| (self.keys.intern(p), *w)))
            .collect::<Result<Vec<_>>>()?;
        let mixture = Arc::new(MixtureRecord::new(entries, denominator)?);
        let realized = realized
            .map(|p| self.check_dim(p).map(|_| self.keys.intern(p)))
            .transpose()?;
        if outcome.index() > self.d() {
            return Err(Error::InvalidOutcome {
                index: outcome.index(),
                d: self.d(),
            });
        }
        self.days.push(DayRecord {
            mixture,
            realized,
            outcome,
            adversary: None,
        });
        self.header.days = self.days.len() as u64;
        Ok(())
    }

    fn check_dim(&self, p: &RationalDist) -> Result<()> {
        if p.dim() != self.d() {
            return Err(Error::DimensionMismatch {
                left: self.d(),
                right: p.dim(),
            });
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, out: &mut W) -> Result<()> {
        #[derive(Serialize)]
        struct Head<'a> {
            kind: &'static str,
            format: &'static str,
            #[serde(flatten)]
            header: &'a RunHeader,
        }
        serde_json::to_writer(
            &mut *out,
            &Head {
                kind: "header",
                format: TRANSCRIPT_FORMAT,
                header: &self.header,
            },
        )?;
        out.write_all(b"\n")?;
        for (i, day) in self.days.iter().enumerate() {
            // entries ordered by value so the bytes do not depend on key ids
            let mut mixture: Vec<EntryOut> = day
                .mixture
                .entries
                .iter()
                .map(|e| EntryOut {
                    p: self.keys.get(e.key),
                    w: (e.weight, day.mixture.denominator),
                })
                .collect();
            mixture.sort_by(|a, b| a.p.cmp(b.p));
            let rec = DayOut {
                t: i as u64 + 1,
                mixture,
                pred: day.realized.map(|k| self.keys.get(k)),
                x: day.outcome,
                adv: day.adversary.map(|k| self.keys.get(k)),
            };
            serde_json::to_writer(&mut *out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let corrupt = |line: usize, reason: String| Error::CorruptRecord { line, reason };
        let (_, first) = lines
            .next()
            .ok_or_else(|| corrupt(1, "empty transcript".into()))?;
        let head: HeadIn = serde_json::from_str(&first?).map_err(|e| corrupt(1, e.to_string()))?;
        if head.kind != "header" || head.format != TRANSCRIPT_FORMAT {
            return Err(corrupt(1, format!("unexpected header {:?}/{:?}", head.kind, head.format)));
        }
        let mut tr = Transcript::new(head.header);
        let d = tr.d();
        let mut last: Option<Arc<MixtureRecord>> = None;
        for (i, line) in lines {
            let n = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: DayIn = serde_json::from_str(&line).map_err(|e| corrupt(n, e.to_string()))?;
            let expected = tr.days.len() as u64 + 1;
            if rec.t != expected {
                return Err(corrupt(n, format!("day {} out of sequence (expected {expected})", rec.t)));
            }
            let den = rec.mixture.first().map(|e| e.w.1).unwrap_or(0);
            let mut entries = Vec::with_capacity(rec.mixture.len());
            for e in &rec.mixture {
                if e.w.1 != den {
                    return Err(corrupt(n, "mixture weights use different denominators".into()));
                }
                if e.p.dim() != d {
                    return Err(corrupt(n, format!("prediction has dimension {}", e.p.dim())));
                }
                entries.push((tr.keys.intern(&e.p), e.w.0));
            }
            let mixture = MixtureRecord::new(entries, den).map_err(|e| corrupt(n, e.to_string()))?;
            let mixture = match &last {
                Some(prev) if **prev == mixture => Arc::clone(prev),
                _ => Arc::new(mixture),
            };
            last = Some(Arc::clone(&mixture));
            let outcome = Outcome::new(rec.x as usize, d).map_err(|e| corrupt(n, e.to_string()))?;
            let mut intern = |p: Option<RationalDist>| -> Result<Option<KeyId>> {
                match p {
                    Some(p) if p.dim() != d => Err(corrupt(n, "dimension mismatch".into())),
                    Some(p) => Ok(Some(tr.keys.intern(&p))),
                    None => Ok(None),
                }
            };
            let realized = intern(rec.pred)?;
            let adversary = intern(rec.adv)?;
            tr.days.push(DayRecord {
                mixture,
                realized,
                outcome,
                adversary,
            });
        }
        if tr.days.len() as u64 != tr.header.days {
            return Err(corrupt(
                tr.days.len() + 1,
                format!("header says {} days, found {}", tr.header.days, tr.days.len()),
            ));
        }
        Ok(tr)
    }
}

#[derive(Serialize)]
struct EntryOut<'a> {
    p: &'a RationalDist,
    w: (u64, u64),
}

#[derive(Serialize)]
struct DayOut<'a> {
    t: u64,
    mixture: Vec<EntryOut<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pred: Option<&'a RationalDist>,
    x: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    adv: Option<&'a RationalDist>,
}

#[derive(Deserialize)]
struct HeadIn {
    kind: String,
    format: String,
    #[serde(flatten)]
    header: RunHeader,
}

#[derive(Deserialize)]
struct EntryIn {
    p: RationalDist,
    w: (u64, u64),
}

#[derive(Deserialize)]
struct DayIn {
    t: u64,
    mixture: Vec<EntryIn>,
    #[serde(default)]
    pred: Option<RationalDist>,
    x: u32,
    #[serde(default)]
    adv: Option<RationalDist>,
}
