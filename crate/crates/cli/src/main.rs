//! `mrzeros`: analyze blocked multirate systems and check them against the
//! generic-case predictions.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use multirate_zeros::harness::{self, emit_report, write_json, GridSpec, ReportFormat};
use multirate_zeros::{oracle, Dimensions, MultirateSystem, TolerancePolicy};

#[derive(Parser)]
#[command(name = "mrzeros", version, about = "Zeros of blocked tall multirate systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Zero report of one system plus comparison with the predictions.
    Analyze {
        #[arg(long)]
        system: PathBuf,
        /// Blocking delay, or `all`.
        #[arg(long, default_value = "all")]
        tau: String,
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Seed for the randomized zero search.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo sweep over a dimension grid.
    Verify {
        /// Grid file; the default desk grid when omitted.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Overrides the number of trials per cell.
        #[arg(long)]
        seeds: Option<usize>,
        /// `.json` or `.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact-rank checks on the structured fixtures.
    Fixtures {
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predicted rank and zero structure for every delay.
    Table {
        /// `n,m,p1,p2,N`
        #[arg(long)]
        dims: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Returns whether every agreement held.
fn run(command: Command) -> Result<bool> {
    match command {
        Command::Analyze { system, tau, policy, seed, out } => {
            let sys = MultirateSystem::load(&system)?;
            let policy = load_policy(policy.as_deref())?;
            let taus = parse_tau(&tau, sys.dims.rate)?;
            let report = harness::analyze(&sys, &taus, &policy, seed)?;
            write_json(&report, &out)?;
            Ok(report.all_agree())
        }
        Command::Verify { grid, seeds, out } => {
            let mut spec = match grid {
                Some(path) => GridSpec::load(path)?,
                None => GridSpec::default(),
            };
            if let Some(k) = seeds {
                spec.trials_per_cell = k;
            }
            let report = harness::run_grid(&spec)?;
            emit_report(&report, ReportFormat::from_path(&out), &out)?;
            eprintln!(
                "{} trials, {} disagreements",
                report.total_trials,
                report.disagreements.len()
            );
            Ok(report.all_agree())
        }
        Command::Fixtures { policy, out } => {
            let policy = load_policy(policy.as_deref())?;
            let report = harness::run_fixture_suite(&policy);
            write_json(&report, &out)?;
            eprintln!("{}/{} fixture checks passed", report.passed, report.total);
            Ok(report.all_pass())
        }
        Command::Table { dims, out } => {
            let dims = parse_dims(&dims)?;
            let table = oracle::render_table(&dims)?;
            std::fs::write(&out, table).with_context(|| format!("writing {}", out.display()))?;
            Ok(true)
        }
    }
}

fn load_policy(path: Option<&Path>) -> Result<TolerancePolicy> {
    Ok(match path {
        Some(p) => TolerancePolicy::load(p)?,
        None => TolerancePolicy::default(),
    })
}

fn parse_tau(arg: &str, rate: usize) -> Result<Vec<usize>> {
    if arg.eq_ignore_ascii_case("all") {
        return Ok((1..=rate).collect());
    }
    let tau: usize = arg
        .parse()
        .with_context(|| format!("--tau expects an integer or `all`, got `{arg}`"))?;
    if tau == 0 || tau > rate {
        bail!("--tau {tau} is outside 1..={rate}");
    }
    Ok(vec![tau])
}

fn parse_dims(arg: &str) -> Result<Dimensions> {
    let parts = arg
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .with_context(|| format!("--dims expects five integers n,m,p1,p2,N, got `{arg}`"))?;
    let [n, m, p1, p2, rate] = parts[..] else {
        bail!("--dims expects five integers n,m,p1,p2,N, got `{arg}`");
    };
    Ok(Dimensions::new(n, m, p1, p2, rate)?)
}
