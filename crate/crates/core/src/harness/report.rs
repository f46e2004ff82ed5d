//! Verification reports and their JSON/CSV output.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixtures::FixtureCheck;
use crate::model::Dimensions;

use super::grid::GridSpec;
use super::TrialRecord;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Aggregate over the trials of one `(dims, tau)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub dims: Dimensions,
    pub tau: usize,
    pub trials: usize,
    pub failed_measurements: usize,
    pub agreeing: BTreeMap<String, usize>,
    pub all_agree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub tool_version: String,
    pub timestamp: String,
    pub grid: Option<GridSpec>,
    pub checks: Vec<String>,
    pub total_trials: usize,
    /// Agreeing trials over all trials, per check. Empty without trials.
    pub agreement_rate: BTreeMap<String, f64>,
    pub cells: Vec<CellAggregate>,
    pub disagreements: Vec<TrialRecord>,
    pub trials: Vec<TrialRecord>,
}

impl VerificationReport {
    /// Assembles a report from trials in their final order.
    pub fn from_trials(grid: Option<GridSpec>, checks: Vec<String>, trials: Vec<TrialRecord>) -> Self {
        let mut agreeing: BTreeMap<String, usize> = checks.iter().map(|c| (c.clone(), 0)).collect();
        let mut cells: Vec<CellAggregate> = Vec::new();
        for t in &trials {
            for (name, &ok) in &t.agreement {
                *agreeing.entry(name.clone()).or_default() += usize::from(ok);
            }
            let cell = match cells.iter_mut().find(|c| c.dims == t.dims && c.tau == t.tau) {
                Some(c) => c,
                None => {
                    cells.push(CellAggregate {
                        dims: t.dims,
                        tau: t.tau,
                        trials: 0,
                        failed_measurements: 0,
                        agreeing: checks.iter().map(|c| (c.clone(), 0)).collect(),
                        all_agree: 0,
                    });
                    cells.last_mut().unwrap()
                }
            };
            cell.trials += 1;
            cell.failed_measurements += usize::from(t.error.is_some());
            cell.all_agree += usize::from(t.agree_all);
            for (name, &ok) in &t.agreement {
                *cell.agreeing.entry(name.clone()).or_default() += usize::from(ok);
            }
        }
        let total = trials.len();
        let agreement_rate = if total == 0 {
            BTreeMap::new()
        } else {
            agreeing
                .into_iter()
                .map(|(k, v)| (k, v as f64 / total as f64))
                .collect()
        };
        VerificationReport {
            tool_version: TOOL_VERSION.to_string(),
            timestamp: now(),
            grid,
            checks,
            total_trials: total,
            agreement_rate,
            cells,
            disagreements: trials.iter().filter(|t| !t.agree_all).cloned().collect(),
            trials,
        }
    }

    pub fn all_agree(&self) -> bool {
        self.disagreements.is_empty()
    }

    /// Number of trials on which `check` agreed.
    pub fn agreeing(&self, check: &str) -> usize {
        self.trials
            .iter()
            .filter(|t| t.agreement.get(check).copied().unwrap_or(false))
            .count()
    }

    /// Copy with the timestamp and all elapsed times cleared.
    pub fn without_timing(&self) -> Self {
        let strip = |t: &TrialRecord| TrialRecord {
            elapsed_us: 0,
            ..t.clone()
        };
        VerificationReport {
            timestamp: String::new(),
            disagreements: self.disagreements.iter().map(strip).collect(),
            trials: self.trials.iter().map(strip).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSuiteReport {
    pub tool_version: String,
    pub timestamp: String,
    pub total: usize,
    pub passed: usize,
    pub per_fixture: BTreeMap<String, (usize, usize)>,
    pub failures: Vec<FixtureCheck>,
    pub checks: Vec<FixtureCheck>,
}

impl FixtureSuiteReport {
    pub fn from_checks(checks: Vec<FixtureCheck>) -> Self {
        let mut per_fixture: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for c in &checks {
            let e = per_fixture.entry(c.fixture.clone()).or_default();
            e.0 += usize::from(c.pass);
            e.1 += 1;
        }
        FixtureSuiteReport {
            tool_version: TOOL_VERSION.to_string(),
            timestamp: now(),
            total: checks.len(),
            passed: checks.iter().filter(|c| c.pass).count(),
            per_fixture,
            failures: checks.iter().filter(|c| !c.pass).cloned().collect(),
            checks,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn without_timing(&self) -> Self {
        FixtureSuiteReport {
            timestamp: String::new(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    /// Format implied by the file extension; JSON unless it is `.csv`.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => ReportFormat::Csv,
            _ => ReportFormat::Json,
        }
    }
}

pub const CSV_HEADER: [&str; 18] = [
    "n",
    "m",
    "p1",
    "p2",
    "N",
    "tau",
    "seed",
    "class",
    "rank_D_meas",
    "rank_D_pred",
    "nrank_meas",
    "nrank_pred",
    "mz_meas",
    "mz_pred",
    "minf_meas",
    "minf_pred",
    "n_finite_nonzero",
    "agree_all",
];

#[derive(Serialize)]
struct CsvRow<'a> {
    n: usize,
    m: usize,
    p1: usize,
    p2: usize,
    rate: usize,
    tau: usize,
    seed: u64,
    class: &'a str,
    rank_d_meas: Option<usize>,
    rank_d_pred: usize,
    nrank_meas: Option<usize>,
    nrank_pred: usize,
    mz_meas: Option<usize>,
    mz_pred: usize,
    minf_meas: Option<usize>,
    minf_pred: usize,
    n_finite_nonzero: Option<usize>,
    agree_all: bool,
}

impl<'a> From<&'a TrialRecord> for CsvRow<'a> {
    fn from(t: &'a TrialRecord) -> Self {
        let m = t.measured.as_ref();
        let p = &t.predicted;
        CsvRow {
            n: t.dims.n,
            m: t.dims.m,
            p1: t.dims.p1,
            p2: t.dims.p2,
            rate: t.dims.rate,
            tau: t.tau,
            seed: t.seed,
            class: t.class.label(),
            rank_d_meas: m.map(|m| m.profile.rank_d),
            rank_d_pred: p.rank_d,
            nrank_meas: m.map(|m| m.profile.normal_rank),
            nrank_pred: p.normal_rank,
            mz_meas: m.map(|m| m.zeros.mult_at_zero),
            mz_pred: p.mult_at_zero,
            minf_meas: m.map(|m| m.zeros.mult_at_infinity),
            minf_pred: p.mult_at_infinity,
            n_finite_nonzero: m.map(|m| m.zeros.finite_nonzero_zeros.len()),
            agree_all: t.agree_all,
        }
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn write_csv(report: &VerificationReport, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(CSV_HEADER)?;
    for t in &report.trials {
        w.serialize(CsvRow::from(t))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn emit_report(report: &VerificationReport, format: ReportFormat, path: &Path) -> Result<()> {
    match format {
        ReportFormat::Json => write_json(report, path),
        ReportFormat::Csv => write_csv(report, path),
    }
}
