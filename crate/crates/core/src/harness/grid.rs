//! Dimension grids and the seed schedule.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dimensions, TolerancePolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub min: usize,
    pub max: usize,
}

impl IntRange {
    pub fn new(min: usize, max: usize) -> Self {
        IntRange { min, max }
    }

    pub fn values(&self) -> std::ops::RangeInclusive<usize> {
        self.min..=self.max
    }
}

/// `"all"` or an explicit list of delays.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TauRepr", into = "TauRepr")]
pub enum TauSelection {
    All,
    List(Vec<usize>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TauRepr {
    Word(String),
    List(Vec<usize>),
}

impl TryFrom<TauRepr> for TauSelection {
    type Error = String;

    fn try_from(r: TauRepr) -> std::result::Result<Self, String> {
        match r {
            TauRepr::Word(w) if w == "all" => Ok(TauSelection::All),
            TauRepr::Word(w) => Err(format!("tau must be \"all\" or a list, got {w:?}")),
            TauRepr::List(v) => Ok(TauSelection::List(v)),
        }
    }
}

impl From<TauSelection> for TauRepr {
    fn from(t: TauSelection) -> Self {
        match t {
            TauSelection::All => TauRepr::Word("all".into()),
            TauSelection::List(v) => TauRepr::List(v),
        }
    }
}

impl TauSelection {
    /// Selected delays that are valid for rate `rate`, ascending.
    pub fn for_rate(&self, rate: usize) -> Vec<usize> {
        match self {
            TauSelection::All => (1..=rate).collect(),
            TauSelection::List(v) => {
                let mut taus: Vec<usize> = v.iter().copied().filter(|t| (1..=rate).contains(t)).collect();
                taus.sort_unstable();
                taus.dedup();
                taus
            }
        }
    }
}

/// Grid of tall dimensions. Slow output counts are
/// `p2 = N * max(m - p1, 0) + offset` for each entry of `p2_offsets`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub n: IntRange,
    pub m: IntRange,
    pub p1: IntRange,
    /// Also enumerate `p1 > m` when the `p1` range allows it.
    pub fast_tall: bool,
    pub p2_offsets: Vec<usize>,
    pub rates: Vec<usize>,
    pub tau: TauSelection,
    pub trials_per_cell: usize,
    pub base_seed: u64,
    pub policy: TolerancePolicy,
    /// Check names; empty means every built-in check.
    pub checks: Vec<String>,
}

impl Default for GridSpec {
    /// The desk grid: `n` 1..5, `m` 1..4, `p1` 1..m, `N` in {2, 3, 4},
    /// offsets {1, 2}, all delays, 10 trials per cell.
    fn default() -> Self {
        GridSpec {
            n: IntRange::new(1, 5),
            m: IntRange::new(1, 4),
            p1: IntRange::new(1, 4),
            fast_tall: false,
            p2_offsets: vec![1, 2],
            rates: vec![2, 3, 4],
            tau: TauSelection::All,
            trials_per_cell: 10,
            base_seed: 0,
            policy: TolerancePolicy::default(),
            checks: Vec::new(),
        }
    }
}

impl GridSpec {
    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDimensions(msg));
        if self.trials_per_cell == 0 {
            return bad("trials_per_cell must be at least 1".into());
        }
        for (name, r) in [("n", self.n), ("m", self.m), ("p1", self.p1)] {
            if r.min == 0 || r.min > r.max {
                return bad(format!("range {name} = {}..{} must be nonempty and start at 1 or more", r.min, r.max));
            }
        }
        if self.p2_offsets.contains(&0) {
            return bad("p2 offsets must be at least 1".into());
        }
        if self.rates.iter().any(|&r| r < 2) {
            return bad("rates must be at least 2".into());
        }
        self.policy.check()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: GridSpec = serde_json::from_str(&text)?;
        spec.check()?;
        Ok(spec)
    }

    /// Every tall cell, sorted lexicographically by `(n, m, p1, p2, N)`.
    pub fn cells(&self) -> Vec<Dimensions> {
        let mut cells = Vec::new();
        for n in self.n.values() {
            for m in self.m.values() {
                for p1 in self.p1.values() {
                    if p1 > m && !self.fast_tall {
                        continue;
                    }
                    for &rate in &self.rates {
                        for &offset in &self.p2_offsets {
                            let p2 = rate * m.saturating_sub(p1) + offset;
                            if let Ok(d) = Dimensions::new(n, m, p1, p2, rate) {
                                if d.class().is_tall() {
                                    cells.push(d);
                                }
                            }
                        }
                    }
                }
            }
        }
        cells.sort_by_key(|d| (d.n, d.m, d.p1, d.p2, d.rate));
        cells.dedup();
        cells
    }

    /// Seed of trial `trial` in cell `cell` out of `cell_count` cells.
    ///
    /// Seeds are assigned trial-major, so the first trials of a grid do not
    /// depend on `trials_per_cell`.
    pub fn seed(&self, cell: usize, trial: usize, cell_count: usize) -> u64 {
        self.base_seed
            .wrapping_add((trial * cell_count + cell) as u64)
    }
}
