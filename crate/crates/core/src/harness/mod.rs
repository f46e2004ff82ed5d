//! Seeded Monte Carlo verification.
//!
//! One *instance* is a random generic system for a given `(dims, seed)`. It
//! is measured at every delay `tau` in `1..=N`, so checks that relate delays
//! (duality, delay independence of the normal rank) compare measurements of
//! the same system. A [`TrialRecord`] is the view of one instance at one
//! delay.

pub mod analyze;
pub mod checks;
pub mod grid;
pub mod report;

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocking::{block, max_lift_residual};
use crate::error::Result;
use crate::fixtures::FixtureRegistry;
use crate::model::{random_generic, Dimensions, SystemClass, TolerancePolicy};
use crate::numerics::RankProfile;
use crate::oracle::{predict, TheoryPrediction};
use crate::zeros::{zero_report, ZeroReport};

pub use analyze::{analyze, AnalysisEntry, AnalysisReport};
pub use checks::{Check, CheckRegistry, TrialContext};
pub use grid::{GridSpec, IntRange, TauSelection};
pub use report::{emit_report, write_csv, write_json, CellAggregate, FixtureSuiteReport, ReportFormat, VerificationReport};

/// Random points per delay for the lift recursion check.
pub const LIFT_POINTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub profile: RankProfile,
    pub zeros: ZeroReport,
    /// Largest lift residual; `None` at `tau = N`, where there is no next
    /// delay.
    pub lift_residual: Option<f64>,
}

/// Measurements of one random instance at every delay.
#[derive(Debug, Clone)]
pub struct InstanceMeasurement {
    pub dims: Dimensions,
    pub seed: u64,
    pub per_tau: Vec<std::result::Result<Measured, String>>,
    pub elapsed_us: Vec<u64>,
}

impl InstanceMeasurement {
    pub fn at(&self, tau: usize) -> Option<&Measured> {
        self.per_tau.get(tau.checked_sub(1)?)?.as_ref().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub dims: Dimensions,
    pub tau: usize,
    pub seed: u64,
    pub class: SystemClass,
    pub policy: TolerancePolicy,
    pub measured: Option<Measured>,
    pub predicted: TheoryPrediction,
    pub agreement: BTreeMap<String, bool>,
    pub agree_all: bool,
    pub error: Option<String>,
    pub elapsed_us: u64,
}

fn measure_at(
    sys: &crate::model::MultirateSystem,
    tau: usize,
    seed: u64,
    policy: &TolerancePolicy,
) -> Result<Measured> {
    let blk = block(sys, tau)?;
    let zeros = zero_report(&blk, policy, seed)?;
    let profile = RankProfile {
        normal_rank: zeros.normal_rank,
        rank_at_zero: zeros.rank_at_zero,
        rank_at_infinity: zeros.rank_at_infinity,
        rank_d: zeros.rank_at_infinity - sys.dims.n,
    };
    let lift_residual = if tau < sys.dims.rate {
        Some(max_lift_residual(sys, tau, LIFT_POINTS, seed, policy)?)
    } else {
        None
    };
    Ok(Measured {
        profile,
        zeros,
        lift_residual,
    })
}

/// Draws the instance for `(dims, seed)` and measures it at every delay.
pub fn measure_instance(dims: &Dimensions, seed: u64, policy: &TolerancePolicy) -> Result<InstanceMeasurement> {
    dims.check()?;
    let sys = random_generic(dims, seed);
    let mut per_tau = Vec::with_capacity(dims.rate);
    let mut elapsed_us = Vec::with_capacity(dims.rate);
    for tau in 1..=dims.rate {
        let start = Instant::now();
        per_tau.push(measure_at(&sys, tau, seed, policy).map_err(|e| e.to_string()));
        elapsed_us.push(start.elapsed().as_micros() as u64);
    }
    Ok(InstanceMeasurement {
        dims: *dims,
        seed,
        per_tau,
        elapsed_us,
    })
}

fn record(
    instance: &InstanceMeasurement,
    tau: usize,
    predicted: TheoryPrediction,
    checks: &CheckRegistry,
    policy: &TolerancePolicy,
) -> TrialRecord {
    let (measured, error, agreement) = match &instance.per_tau[tau - 1] {
        Ok(m) => {
            let ctx = TrialContext {
                tau,
                predicted: &predicted,
                measured: m,
                instance,
            };
            (Some(m.clone()), None, checks.evaluate(&ctx))
        }
        Err(e) => (
            None,
            Some(e.clone()),
            checks.names().into_iter().map(|n| (n.to_string(), false)).collect(),
        ),
    };
    TrialRecord {
        dims: instance.dims,
        tau,
        seed: instance.seed,
        class: instance.dims.class(),
        policy: *policy,
        agree_all: error.is_none() && agreement.values().all(|&ok| ok),
        measured,
        predicted,
        agreement,
        error,
        elapsed_us: instance.elapsed_us[tau - 1],
    }
}

fn instance_records(
    dims: &Dimensions,
    seed: u64,
    taus: &[usize],
    policy: &TolerancePolicy,
    checks: &CheckRegistry,
) -> Result<Vec<TrialRecord>> {
    let predictions = taus
        .iter()
        .map(|&tau| predict(dims, tau))
        .collect::<Result<Vec<_>>>()?;
    let instance = measure_instance(dims, seed, policy)?;
    Ok(taus
        .iter()
        .zip(predictions)
        .map(|(&tau, p)| record(&instance, tau, p, checks, policy))
        .collect())
}

/// Measures `random_generic(dims, seed)` and compares it with the oracle at
/// delay `tau`, using every built-in check. A failed measurement is recorded
/// in the trial, not returned as an error.
pub fn run_trial(dims: &Dimensions, tau: usize, seed: u64, policy: &TolerancePolicy) -> Result<TrialRecord> {
    let mut records = instance_records(dims, seed, &[tau], policy, &CheckRegistry::builtin())?;
    Ok(records.remove(0))
}

/// Runs every cell of `spec`. Trials are listed cell by cell, then by trial,
/// then by delay, whatever the execution order.
pub fn run_grid(spec: &GridSpec) -> Result<VerificationReport> {
    spec.check()?;
    let checks = if spec.checks.is_empty() {
        CheckRegistry::builtin()
    } else {
        CheckRegistry::select(&spec.checks)?
    };
    let cells = spec.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..spec.trials_per_cell).map(move |t| (c, t)))
        .collect();
    let batches = jobs
        .par_iter()
        .map(|&(c, t)| {
            let dims = &cells[c];
            let taus = spec.tau.for_rate(dims.rate);
            if taus.is_empty() {
                return Ok(Vec::new());
            }
            let seed = spec.seed(c, t, cells.len());
            instance_records(dims, seed, &taus, &spec.policy, &checks)
        })
        .collect::<Result<Vec<_>>>()?;
    let names = checks.names().into_iter().map(String::from).collect();
    Ok(VerificationReport::from_trials(
        Some(spec.clone()),
        names,
        batches.into_iter().flatten().collect(),
    ))
}

/// Exact rank checks of every registered fixture.
pub fn run_fixture_suite(policy: &TolerancePolicy) -> FixtureSuiteReport {
    run_fixture_suite_with(&FixtureRegistry::builtin(), policy)
}

pub fn run_fixture_suite_with(registry: &FixtureRegistry, policy: &TolerancePolicy) -> FixtureSuiteReport {
    let fixtures: Vec<_> = registry.iter().collect();
    let checks = fixtures
        .par_iter()
        .map(|f| f.exactness_checks(policy))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    FixtureSuiteReport::from_checks(checks)
}
