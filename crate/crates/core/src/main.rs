use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hicalib_core::harness::concentration::run_concentration;
use hicalib_core::harness::config::RunConfig;
use hicalib_core::harness::lowerbound::run_lowerbound;
use hicalib_core::harness::oracle::run_oracle;
use hicalib_core::harness::{cmd_certify, cmd_run};
use hicalib_core::Result;

#[derive(Parser)]
#[command(name = "hicalib", version, about = "Hierarchical calibrated forecasting experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one run and write its transcript and metrics.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the pathwise certificate of a finished run.
    Certify {
        #[arg(long)]
        run: PathBuf,
    },
    /// Monte Carlo DCE on the randomized hard sequence.
    Lowerbound {
        #[arg(long = "R")]
        levels: u32,
        #[arg(long = "K")]
        blocks: u32,
        #[arg(long, default_value = "truthful")]
        forecaster: String,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare the metrics with brute-force references on random cases.
    Oracle {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long = "max-T", default_value_t = 16)]
        max_t: u64,
        #[arg(long = "max-d", default_value_t = 4)]
        max_d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// ECE/DCE gap at the config's S and at a larger S.
    Concentration {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Second base length to compare against (default 16·S).
        #[arg(long = "compare-S")]
        compare_s: Option<u64>,
    },
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// `Ok(true)` when every check passed.
fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run { config, seed, out } => {
            let output = cmd_run(&config, seed, &out)?;
            let m = &output.metrics;
            println!(
                "{}: T={} dce={} dce/T={} ece={}±{}",
                m.run_id, m.horizon, m.dce, m.dce_per_day, m.ece_mean, m.ece_stderr
            );
            Ok(true)
        }
        Command::Certify { run } => {
            let report = cmd_certify(&run)?;
            let failed: Vec<_> = report.failures().collect();
            for c in &failed {
                eprintln!("FAIL {} [{}]: measured {} bound {} margin {}", c.name, c.scope, c.measured, c.bound, c.margin);
            }
            println!(
                "{}: {} checks, {} failed; A0={} A1={} A2={} A3={}",
                report.run_id,
                report.checks.len(),
                failed.len(),
                report.chain.a0,
                report.chain.a1,
                report.chain.a2,
                report.chain.a3
            );
            Ok(failed.is_empty())
        }
        Command::Lowerbound {
            levels,
            blocks,
            forecaster,
            trials,
            seed,
        } => {
            let report = run_lowerbound(levels, blocks, &forecaster, trials, seed)?;
            print_json(&report)?;
            Ok(report.pass)
        }
        Command::Oracle {
            trials,
            max_t,
            max_d,
            seed,
        } => {
            let report = run_oracle(trials, max_t, max_d, seed)?;
            print_json(&report)?;
            Ok(report.pass)
        }
        Command::Concentration {
            config,
            trials,
            seed,
            compare_s,
        } => {
            let cfg = RunConfig::load(&config)?;
            let report = run_concentration(&cfg, trials, seed, compare_s)?;
            print_json(&report)?;
            Ok(report.pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
