//! Per-trial agreement checks.
//!
//! A [`Check`] compares one measured quantity of a trial with its prediction
//! (or with a measurement of the same instance at another delay). Checks are
//! looked up by name in a [`CheckRegistry`].

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::oracle::{dual_index, TheoryPrediction};

use super::{InstanceMeasurement, Measured};

/// Lift residuals must stay below this.
pub const LIFT_RESIDUAL_LIMIT: f64 = 1e-9;

pub struct TrialContext<'a> {
    pub tau: usize,
    pub predicted: &'a TheoryPrediction,
    pub measured: &'a Measured,
    pub instance: &'a InstanceMeasurement,
}

impl TrialContext<'_> {
    fn at(&self, tau: usize) -> Option<&Measured> {
        self.instance.at(tau)
    }
}

pub trait Check: Send + Sync {
    fn name(&self) -> &'static str;

    fn agrees(&self, ctx: &TrialContext<'_>) -> bool;
}

struct RankD;

impl Check for RankD {
    fn name(&self) -> &'static str {
        "rank_d"
    }

    fn agrees(&self, ctx: &TrialContext<'_>) -> bool {
        ctx.measured.profile.rank_d == ctx.predicted.rank_d
    }
}

struct NormalRank;

impl Check for NormalRank {
    fn name(&self) -> &'static str {
        "normal_rank"
    }

    fn agrees(&self, ctx: &TrialContext<'_>) -> bool {
        ctx.measured.profile.normal_rank == ctx.predicted.normal_rank
    }
}

struct MultZero;

impl Check for MultZero {
    fn name(&self) -> &'static str {
        "mult_zero"
    }

    fn agrees(&self, ctx: &TrialContext<'_>) -> bool {
        ctx.measured.zeros.mult_at_zero == ctx.predicted.mult_at_zero
    }
}

struct MultInfinity;

impl Check for MultInfinity {
    fn name(&self) -> &'static str {
        "mult_infinity"
    }

    fn agrees(&self, ctx: &TrialContext<'_>) -> bool {
        ctx.measured.zeros.mult_at_infinity == ctx.predicted.mult_at_infinity
    }
}

struct ZeroFree;

impl Check for ZeroFree {
    fn name(&self) -> &'static str {
        "zero_free"
    }

    fn agrees(&self, ctx: &TrialContext<'_>) -> bool {
        ctx.measured.zeros.is_zero_free()
    }
}

struct Duality;

impl Check for Duality {
    fn name(&self) -> &'static str {
        "duality"
    }

    fn agrees(&self, ctx: &TrialContext<'_>) -> bool {
        let here = &ctx.measured.zeros;
        ctx.at(dual_index(ctx.tau, ctx.instance.dims.rate))
            .is_some_and(|there| {
                (here.mult_at_zero, here.mult_at_infinity)
                    == (there.zeros.mult_at_infinity, there.zeros.mult_at_zero)
            })
    }
}

struct TauIndependence;

impl Check for TauIndependence {
    fn name(&self) -> &'static str {
        "tau_independence"
    }

    fn agrees(&self, ctx: &TrialContext<'_>) -> bool {
        let here = ctx.measured.profile.normal_rank;
        (1..=ctx.instance.dims.rate)
            .all(|t| ctx.at(t).is_some_and(|m| m.profile.normal_rank == here))
    }
}

struct LiftRecursion;

impl Check for LiftRecursion {
    fn name(&self) -> &'static str {
        "lift_recursion"
    }

    fn agrees(&self, ctx: &TrialContext<'_>) -> bool {
        ctx.measured
            .lift_residual
            .is_none_or(|r| r < LIFT_RESIDUAL_LIMIT)
    }
}

pub struct CheckRegistry {
    checks: Vec<Box<dyn Check>>,
}

impl Default for CheckRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl CheckRegistry {
    pub fn builtin() -> Self {
        CheckRegistry {
            checks: vec![
                Box::new(RankD),
                Box::new(NormalRank),
                Box::new(MultZero),
                Box::new(MultInfinity),
                Box::new(ZeroFree),
                Box::new(Duality),
                Box::new(TauIndependence),
                Box::new(LiftRecursion),
            ],
        }
    }

    /// The built-in checks named in `names`, in registry order.
    pub fn select(names: &[String]) -> Result<Self> {
        let all = Self::builtin();
        if let Some(bad) = names.iter().find(|n| !all.names().contains(&n.as_str())) {
            return Err(Error::UnknownCheck(bad.clone()));
        }
        Ok(CheckRegistry {
            checks: all
                .checks
                .into_iter()
                .filter(|c| names.iter().any(|n| n == c.name()))
                .collect(),
        })
    }

    pub fn register(&mut self, check: Box<dyn Check>) {
        self.checks.retain(|c| c.name() != check.name());
        self.checks.push(check);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.checks.iter().map(|c| c.name()).collect()
    }

    pub fn evaluate(&self, ctx: &TrialContext<'_>) -> BTreeMap<String, bool> {
        self.checks
            .iter()
            .map(|c| (c.name().to_string(), c.agrees(ctx)))
            .collect()
    }
}
