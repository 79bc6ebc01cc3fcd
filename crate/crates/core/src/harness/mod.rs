//! Experiment driver behind the `hicalib` binary.

pub mod concentration;
pub mod config;
pub mod lowerbound;
pub mod oracle;
pub mod protocol;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::certificate::{certify, CertificateReport};
use crate::error::{Error, Result};
use crate::forecaster::HierarchicalForecaster;
use crate::metrics::{dce, ece_estimate};
use crate::rng::PRNG_NAME;
use crate::transcript::{RunHeader, Transcript};

use config::RunConfig;
use protocol::{simulate, SimOptions};

pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CERTIFICATE_JSON: &str = "certificate.json";
pub const CERTIFICATE_CSV: &str = "certificate.csv";

/// Deterministic id for a (config, seed) pair.
pub fn run_id(cfg: &RunConfig, seed: u64) -> String {
    let f = &cfg.forecast;
    format!(
        "d{}-L{}-H{}-S{}-m{}-{}-seed{seed}",
        f.d,
        f.levels,
        f.iterations,
        f.base_len,
        f.m,
        cfg.adversary.name()
    )
}

pub fn run_header(cfg: &RunConfig, seed: u64) -> RunHeader {
    RunHeader {
        run_id: run_id(cfg, seed),
        seed,
        prng: PRNG_NAME.into(),
        d: cfg.forecast.d,
        config: Some(cfg.forecast),
        mode: cfg.mode,
        adversary: cfg.adversary.name(),
        days: cfg.forecast.horizon(),
    }
}

/// One trial of the hierarchical forecaster under the config's adversary.
pub fn simulate_run(cfg: &RunConfig, seed: u64, trial: u64, opts: SimOptions) -> Result<Transcript> {
    let mut f = HierarchicalForecaster::new(cfg.forecast);
    let mut adv = cfg.adversary.build(seed, trial);
    simulate(&mut f, adv.as_mut(), run_header(cfg, seed), trial, opts)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub run_id: String,
    pub seed: u64,
    #[serde(rename = "T")]
    pub horizon: u64,
    pub d: usize,
    #[serde(rename = "L")]
    pub levels: usize,
    #[serde(rename = "H")]
    pub iterations: u64,
    #[serde(rename = "S")]
    pub base_len: u64,
    pub m: u64,
    pub adversary: String,
    pub dce: f64,
    pub dce_per_day: f64,
    pub ece_mean: f64,
    pub ece_stderr: f64,
    pub trials: usize,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub transcript: Transcript,
    pub metrics: MetricsRow,
}

/// Trial 0 is the recorded transcript. The ECE estimate re-simulates trials
/// `0..cfg.trials` in sampled mode, so it does not depend on the run's mode.
pub fn execute_run(cfg: &RunConfig, seed: u64) -> Result<RunOutput> {
    let opts = SimOptions {
        mode: cfg.mode,
        record_adversary: cfg.record_adversary,
    };
    let transcript = simulate_run(cfg, seed, 0, opts)?;
    let sampled = SimOptions {
        mode: crate::forecaster::Mode::Sampled,
        record_adversary: false,
    };
    let ece = ece_estimate(cfg.trials, |trial| simulate_run(cfg, seed, trial, sampled))?;
    let total = dce(&transcript)?;
    let f = &cfg.forecast;
    let metrics = MetricsRow {
        run_id: transcript.header.run_id.clone(),
        seed,
        horizon: f.horizon(),
        d: f.d,
        levels: f.levels,
        iterations: f.iterations,
        base_len: f.base_len,
        m: f.m,
        adversary: cfg.adversary.name(),
        dce: total,
        dce_per_day: total / f.horizon() as f64,
        ece_mean: ece.mean,
        ece_stderr: ece.stderr,
        trials: ece.trials,
    };
    Ok(RunOutput { transcript, metrics })
}

pub fn write_metrics<W: Write>(out: W, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// `run --config F --seed N --out DIR`. A seed given here overrides the one
/// in the config.
pub fn cmd_run(config: &Path, seed: Option<u64>, out_dir: &Path) -> Result<RunOutput> {
    let cfg = RunConfig::load(config)?;
    let seed = seed
        .or(cfg.seed)
        .ok_or_else(|| Error::ConfigInvalid("no seed given on the command line or in the config".into()))?;
    let output = execute_run(&cfg, seed)?;
    fs::create_dir_all(out_dir)?;
    let mut w = BufWriter::new(File::create(out_dir.join(TRANSCRIPT_FILE))?);
    output.transcript.write_jsonl(&mut w)?;
    w.flush()?;
    write_metrics(File::create(out_dir.join(METRICS_FILE))?, std::slice::from_ref(&output.metrics))?;
    Ok(output)
}

pub fn read_run(run_dir: &Path) -> Result<Transcript> {
    let path: PathBuf = run_dir.join(TRANSCRIPT_FILE);
    if !path.is_file() {
        return Err(Error::MissingTranscript(path.display().to_string()));
    }
    Transcript::read_jsonl(BufReader::new(File::open(path)?))
}

/// `certify --run DIR`: writes the certificate next to the transcript.
pub fn cmd_certify(run_dir: &Path) -> Result<CertificateReport> {
    let tr = read_run(run_dir)?;
    let report = certify(&tr)?;
    fs::write(run_dir.join(CERTIFICATE_JSON), report.to_json()? + "\n")?;
    report.write_csv(File::create(run_dir.join(CERTIFICATE_CSV))?)?;
    Ok(report)
}
