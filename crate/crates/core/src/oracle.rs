//! Closed-form predictions for generic tall systems.
//!
//! Every prediction comes with the label of the case that produced it. With
//! `r = m - p1` the case boundaries are the state dimensions
//! `(tau - 1) r`, `(N - tau) r` and `(N - 1) r`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{classify, Dimensions, SystemClass};

pub type Prediction = (usize, &'static str);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoryPrediction {
    pub dims: Dimensions,
    pub tau: usize,
    pub system_class: SystemClass,
    pub rank_d: usize,
    pub normal_rank: usize,
    pub mult_at_zero: usize,
    pub mult_at_infinity: usize,
    pub case_labels: BTreeMap<String, String>,
}

fn tall_class(dims: &Dimensions) -> Result<SystemClass> {
    dims.check()?;
    match classify(dims) {
        SystemClass::NotTall => Err(Error::NotTallClass(SystemClass::NotTall)),
        class => Ok(class),
    }
}

fn tall_class_at(dims: &Dimensions, tau: usize) -> Result<SystemClass> {
    let class = tall_class(dims)?;
    dims.check_tau(tau)?;
    Ok(class)
}

/// `None` when `p1 >= m`, otherwise `m - p1`.
fn input_excess(dims: &Dimensions) -> Option<usize> {
    (dims.p1 < dims.m).then(|| dims.m - dims.p1)
}

pub fn predict_rank_d(dims: &Dimensions, tau: usize) -> Result<Prediction> {
    let class = tall_class_at(dims, tau)?;
    let Dimensions { n, m, p1, rate, .. } = *dims;
    if class == SystemClass::FastTall {
        return Ok((rate * m, "rank_d.fast_tall"));
    }
    let r = m - p1;
    if n <= (rate - tau) * r {
        Ok(((rate - 1) * p1 + m + n, "rank_d.small_state"))
    } else {
        Ok(((tau - 1) * p1 + (rate - tau + 1) * m, "rank_d.large_state"))
    }
}

pub fn predict_normal_rank(dims: &Dimensions) -> Result<Prediction> {
    tall_class(dims)?;
    let Dimensions { n, m, p1, rate, .. } = *dims;
    match input_excess(dims) {
        None => Ok((n + rate * m, "normal_rank.fast_dominant")),
        Some(r) if n < (rate - 1) * r => Ok(((rate - 1) * p1 + m + 2 * n, "normal_rank.small_state")),
        Some(_) => Ok((n + rate * m, "normal_rank.large_state")),
    }
}

pub fn predict_mult_infinity(dims: &Dimensions, tau: usize) -> Result<Prediction> {
    tall_class_at(dims, tau)?;
    let Dimensions { n, rate, .. } = *dims;
    Ok(match input_excess(dims) {
        None => (0, "mult_infinity.fast_dominant"),
        Some(r) if n <= (rate - tau) * r => (0, "mult_infinity.small_state"),
        Some(r) if n <= (rate - 1) * r => (n - (rate - tau) * r, "mult_infinity.intermediate"),
        Some(r) => ((tau - 1) * r, "mult_infinity.saturated"),
    })
}

pub fn predict_mult_zero(dims: &Dimensions, tau: usize) -> Result<Prediction> {
    tall_class_at(dims, tau)?;
    let Dimensions { n, rate, .. } = *dims;
    Ok(match input_excess(dims) {
        None => (0, "mult_zero.fast_dominant"),
        Some(r) if n <= (tau - 1) * r => (0, "mult_zero.small_state"),
        Some(r) if n <= (rate - 1) * r => (n - (tau - 1) * r, "mult_zero.intermediate"),
        Some(r) => ((rate - tau) * r, "mult_zero.saturated"),
    })
}

/// Rank of `[A^(nu-1) B ... A B B]` for the circular-shift pair.
pub fn predict_controllability_rank(n: usize, m: usize, nu: usize) -> usize {
    n.min(nu * m)
}

/// Delay whose multiplicities at the origin and at infinity are swapped
/// relative to `tau`.
pub fn dual_index(tau: usize, rate: usize) -> usize {
    rate - tau + 1
}

pub fn predict(dims: &Dimensions, tau: usize) -> Result<TheoryPrediction> {
    let system_class = tall_class_at(dims, tau)?;
    let (rank_d, l_d) = predict_rank_d(dims, tau)?;
    let (normal_rank, l_nr) = predict_normal_rank(dims)?;
    let (mult_at_zero, l_z) = predict_mult_zero(dims, tau)?;
    let (mult_at_infinity, l_inf) = predict_mult_infinity(dims, tau)?;
    let case_labels = [
        ("rank_d", l_d),
        ("normal_rank", l_nr),
        ("mult_at_zero", l_z),
        ("mult_at_infinity", l_inf),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    Ok(TheoryPrediction {
        dims: *dims,
        tau,
        system_class,
        rank_d,
        normal_rank,
        mult_at_zero,
        mult_at_infinity,
        case_labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Presence {
    No,
    Yes(usize),
}

impl Presence {
    fn from_mult(k: usize) -> Self {
        if k == 0 {
            Presence::No
        } else {
            Presence::Yes(k)
        }
    }
}

impl fmt::Display for Presence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Presence::No => f.write_str("No"),
            Presence::Yes(k) => write!(f, "Yes ({k})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub tau: usize,
    pub finite_nonzero: Presence,
    pub at_zero: Presence,
    pub at_infinity: Presence,
}

pub fn summary_table(dims: &Dimensions, tau: usize) -> Result<TableRow> {
    let p = predict(dims, tau)?;
    Ok(TableRow {
        tau,
        finite_nonzero: Presence::No,
        at_zero: Presence::from_mult(p.mult_at_zero),
        at_infinity: Presence::from_mult(p.mult_at_infinity),
    })
}

/// Plain-text table of predicted zero structure for every delay.
pub fn render_table(dims: &Dimensions) -> Result<String> {
    let (normal_rank, _) = predict_normal_rank(dims)?;
    let mut out = String::new();
    writeln!(out, "system {dims}, class {}", classify(dims).label()).unwrap();
    writeln!(out, "normal rank {normal_rank} for every tau").unwrap();
    writeln!(
        out,
        "{:>4}  {:>7}  {:<18} {:<10} {:<10}",
        "tau", "rank D", "finite nonzero", "at 0", "at inf"
    )
    .unwrap();
    for tau in 1..=dims.rate {
        let row = summary_table(dims, tau)?;
        let (rank_d, _) = predict_rank_d(dims, tau)?;
        writeln!(
            out,
            "{:>4}  {:>7}  {:<18} {:<10} {:<10}",
            tau,
            rank_d,
            row.finite_nonzero.to_string(),
            row.at_zero.to_string(),
            row.at_infinity.to_string()
        )
        .unwrap();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dims(n: usize, m: usize, p1: usize, p2: usize, rate: usize) -> Dimensions {
        Dimensions::new(n, m, p1, p2, rate).unwrap()
    }

    /// Tall mixed dims from raw draws.
    fn mixed(n: usize, m: usize, p1: usize, extra: usize, rate: usize) -> Dimensions {
        let p1 = p1.min(m);
        dims(n, m, p1, rate * (m - p1) + extra, rate)
    }

    #[test]
    fn example_values() {
        let d = dims(1, 3, 1, 5, 2);
        assert_eq!(predict_rank_d(&d, 1).unwrap(), (5, "rank_d.small_state"));
        assert_eq!(predict_rank_d(&d, 2).unwrap().0, 4);
        assert_eq!(predict_normal_rank(&d).unwrap().0, 6);
        assert_eq!(predict_rank_d(&dims(2, 3, 1, 5, 2), 1).unwrap().0, 6);
        assert_eq!(predict_normal_rank(&dims(4, 2, 1, 3, 2)).unwrap().0, 8);
        assert_eq!(
            predict_normal_rank(&dims(3, 2, 2, 1, 2)).unwrap(),
            (7, "normal_rank.fast_dominant")
        );
    }

    #[test]
    fn wide_rate_dims() {
        let d = dims(5, 5, 3, 24, 8);
        assert_eq!(predict_mult_infinity(&d, 4).unwrap().0, 0);
        assert_eq!(predict_mult_infinity(&d, 8).unwrap(), (5, "mult_infinity.intermediate"));
        assert_eq!(predict_mult_zero(&d, 1).unwrap().0, 5);
        assert_eq!(predict_mult_zero(&d, 5).unwrap().0, 0);
        let row = summary_table(&d, 1).unwrap();
        assert_eq!(
            (row.finite_nonzero, row.at_zero, row.at_infinity),
            (Presence::No, Presence::Yes(5), Presence::No)
        );
    }

    #[test]
    fn balanced_and_fast_tall_have_no_zeros() {
        for d in [dims(3, 2, 2, 1, 3), dims(3, 2, 4, 1, 3)] {
            for tau in 1..=3 {
                assert_eq!(predict_mult_zero(&d, tau).unwrap().0, 0);
                assert_eq!(predict_mult_infinity(&d, tau).unwrap().0, 0);
                let row = summary_table(&d, tau).unwrap();
                assert_eq!(row.at_zero, Presence::No);
                assert_eq!(row.at_infinity, Presence::No);
            }
        }
    }

    #[test]
    fn controllability_and_dual_index() {
        assert_eq!(predict_controllability_rank(4, 2, 2), 4);
        assert_eq!(predict_controllability_rank(5, 2, 2), 4);
        assert_eq!(predict_controllability_rank(2, 3, 1), 2);
        assert_eq!(dual_index(1, 8), 8);
        assert_eq!(dual_index(4, 8), 5);
    }

    #[test]
    fn not_tall_is_rejected() {
        let d = dims(2, 3, 1, 4, 2);
        assert!(matches!(predict_normal_rank(&d), Err(Error::NotTallClass(_))));
        assert!(matches!(predict(&d, 1), Err(Error::NotTallClass(_))));
        assert!(matches!(
            predict_rank_d(&dims(1, 3, 1, 5, 2), 3),
            Err(Error::TauOutOfRange { .. })
        ));
    }

    #[test]
    fn table_lists_every_tau() {
        let text = render_table(&dims(5, 5, 3, 24, 8)).unwrap();
        assert_eq!(text.lines().count(), 3 + 8);
        assert!(text.contains("Yes (5)"));
    }

    proptest! {
        #[test]
        fn rank_d_cases_meet_at_boundary(m in 2usize..6, p1 in 1usize..5, rate in 2usize..6, tau_raw in 0usize..6, extra in 1usize..3) {
            prop_assume!(p1 < m);
            let tau = 1 + tau_raw % rate;
            let n = (rate - tau) * (m - p1);
            prop_assume!(n >= 1);
            let small = (rate - 1) * p1 + m + n;
            let large = (tau - 1) * p1 + (rate - tau + 1) * m;
            prop_assert_eq!(small, large);
            prop_assert_eq!(predict_rank_d(&mixed(n, m, p1, extra, rate), tau).unwrap().0, small);
        }

        #[test]
        fn multiplicity_cases_meet_at_boundary(m in 2usize..6, p1 in 1usize..5, rate in 2usize..6, tau_raw in 0usize..6) {
            prop_assume!(p1 < m);
            let tau = 1 + tau_raw % rate;
            let r = m - p1;
            let n = (rate - 1) * r;
            prop_assert_eq!(n - (rate - tau) * r, (tau - 1) * r);
            prop_assert_eq!(n - (tau - 1) * r, (rate - tau) * r);
        }

        #[test]
        fn duality_of_predictions(n in 1usize..12, m in 1usize..6, p1 in 1usize..6, extra in 1usize..3, rate in 2usize..7, tau_raw in 0usize..7) {
            let d = mixed(n, m, p1, extra, rate);
            let tau = 1 + tau_raw % rate;
            prop_assert_eq!(dual_index(dual_index(tau, rate), rate), tau);
            prop_assert_eq!(
                predict_mult_zero(&d, tau).unwrap().0,
                predict_mult_infinity(&d, dual_index(tau, rate)).unwrap().0
            );
        }

        #[test]
        fn saturated_sum_is_constant(m in 2usize..6, p1 in 1usize..5, rate in 2usize..7, extra_n in 1usize..5, tau_raw in 0usize..7) {
            prop_assume!(p1 < m);
            let r = m - p1;
            let n = (rate - 1) * r + extra_n;
            let d = mixed(n, m, p1, 1, rate);
            let tau = 1 + tau_raw % rate;
            let sum = predict_mult_zero(&d, tau).unwrap().0 + predict_mult_infinity(&d, tau).unwrap().0;
            prop_assert_eq!(sum, (rate - 1) * r);
        }

        #[test]
        fn end_delays_are_one_sided(n in 1usize..12, m in 2usize..6, p1 in 1usize..5, rate in 2usize..7) {
            prop_assume!(p1 < m);
            let d = mixed(n, m, p1, 1, rate);
            prop_assert_eq!(predict_mult_infinity(&d, 1).unwrap().0, 0);
            prop_assert_eq!(predict_mult_zero(&d, rate).unwrap().0, 0);
        }

        #[test]
        fn predictions_are_bounded(n in 1usize..12, m in 1usize..6, p1 in 1usize..8, extra in 1usize..3, rate in 2usize..7, tau_raw in 0usize..7) {
            let p2 = if p1 > m { extra } else { rate * (m - p1) + extra };
            let d = dims(n, m, p1, p2, rate);
            let tau = 1 + tau_raw % rate;
            let p = predict(&d, tau).unwrap();
            prop_assert!(p.rank_d <= d.blocked_inputs().min(d.blocked_outputs()));
            prop_assert!(p.normal_rank <= n + d.blocked_inputs());
            prop_assert!(p.mult_at_infinity <= p.normal_rank);
            prop_assert!(p.mult_at_zero <= p.normal_rank);
            if p.system_class == SystemClass::FastTall {
                prop_assert_eq!((p.mult_at_zero, p.mult_at_infinity), (0, 0));
            }
            for t in 1..=rate {
                prop_assert_eq!(predict(&d, t).unwrap().normal_rank, p.normal_rank);
            }
        }
    }
}
