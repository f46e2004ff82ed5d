//! Analysis of one user-supplied system.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::blocking::block;
use crate::error::Result;
use crate::model::{validate, Dimensions, MultirateSystem, SystemClass, TolerancePolicy};
use crate::oracle::{predict, TheoryPrediction};
use crate::zeros::{zero_report, ZeroReport};
use crate::Error;

use super::report::TOOL_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisEntry {
    pub tau: usize,
    pub rank_d: usize,
    pub zeros: ZeroReport,
    /// Absent for systems that are not tall.
    pub predicted: Option<TheoryPrediction>,
    pub agreement: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tool_version: String,
    pub timestamp: String,
    pub dims: Dimensions,
    pub class: SystemClass,
    pub seed: u64,
    pub policy: TolerancePolicy,
    pub entries: Vec<AnalysisEntry>,
}

impl AnalysisReport {
    pub fn all_agree(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.agreement.values().all(|&ok| ok))
    }
}

/// Zero reports of `sys` at each delay in `taus`, compared with the
/// generic-case predictions when the system is tall.
pub fn analyze(
    sys: &MultirateSystem,
    taus: &[usize],
    policy: &TolerancePolicy,
    seed: u64,
) -> Result<AnalysisReport> {
    let checked = validate(sys);
    if !checked.is_ok() {
        return Err(Error::InvalidSystem(format!("{:?}", checked.violations)));
    }
    policy.check()?;
    let dims = sys.dims;
    let mut entries = Vec::with_capacity(taus.len());
    for &tau in taus {
        let blk = block(sys, tau)?;
        let zeros = zero_report(&blk, policy, seed)?;
        let rank_d = zeros.rank_at_infinity - dims.n;
        let predicted = match predict(&dims, tau) {
            Ok(p) => Some(p),
            Err(Error::NotTallClass(_)) => None,
            Err(e) => return Err(e),
        };
        let agreement = predicted
            .as_ref()
            .map(|p| {
                [
                    ("rank_d", rank_d == p.rank_d),
                    ("normal_rank", zeros.normal_rank == p.normal_rank),
                    ("mult_zero", zeros.mult_at_zero == p.mult_at_zero),
                    ("mult_infinity", zeros.mult_at_infinity == p.mult_at_infinity),
                    ("zero_free", zeros.is_zero_free()),
                ]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect()
            })
            .unwrap_or_default();
        entries.push(AnalysisEntry {
            tau,
            rank_d,
            zeros,
            predicted,
            agreement,
        });
    }
    Ok(AnalysisReport {
        tool_version: TOOL_VERSION.to_string(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        dims,
        class: dims.class(),
        seed,
        policy: *policy,
        entries,
    })
}
