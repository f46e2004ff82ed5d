//! Finite zeros and the zero multiplicities of a system pencil.
//!
//! The pencil `Z*E - F` is compressed to a square `rho x rho` pencil
//! `U (Z*E - F) V` with Gaussian `U`, `V`, where `rho` is the normal rank.
//! Its finite eigenvalues are candidates only: each is re-checked with a rank
//! test on the full pencil ([`verify_zero`]).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::blocking::{BlockedSystem, MatrixPencil};
use crate::error::{Error, Result};
use crate::model::TolerancePolicy;
use crate::numerics::{self, condition_estimate, normal_rank, rank_at, real_eigenvalues};
use crate::rng::{SeededRng, Stream};
use crate::C64;

/// Compressed pencils whose shifted `G` block has a larger condition number
/// are redrawn.
pub const COMPRESSION_CONDITION_LIMIT: f64 = 1e12;

/// Eigenvalues of `G^-1 H` below this magnitude are treated as infinite
/// eigenvalues of the compressed pencil.
pub const INFINITE_EIGENVALUE_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for ComplexValue {
    fn from(z: C64) -> Self {
        ComplexValue { re: z.re, im: z.im }
    }
}

impl From<ComplexValue> for C64 {
    fn from(z: ComplexValue) -> Self {
        C64::new(z.re, z.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocatedZero {
    pub location: ComplexValue,
    /// Rank deficiency at `location`; zero for rejected candidates.
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroReport {
    pub tau: usize,
    pub normal_rank: usize,
    pub rank_at_zero: usize,
    pub rank_at_infinity: usize,
    pub mult_at_zero: usize,
    pub mult_at_infinity: usize,
    pub finite_nonzero_zeros: Vec<LocatedZero>,
    /// Candidates with `zero_radius < |Z| <= cluster_tol`, whatever their
    /// verified multiplicity.
    pub boundary_candidates: Vec<LocatedZero>,
    /// Candidates with `|Z| >= 1 / zero_radius`. These are attributed to the
    /// zero at infinity, as those with `|Z| <= zero_radius` are attributed to
    /// the origin.
    pub far_candidates: Vec<LocatedZero>,
    pub candidates_examined: usize,
    pub seed: u64,
}

impl ZeroReport {
    pub fn is_zero_free(&self) -> bool {
        self.finite_nonzero_zeros.is_empty()
    }
}

/// Candidate finite zeros of `pencil`, given its normal rank.
///
/// With a rank factorization `E = L R`, the nonzero eigenvalues of
/// `G^-1 H = G^-1 (U L)(R V)` are those of the small matrix
/// `(R V) G^-1 (U L)`, which is what gets diagonalized. This drops the
/// trivial zero eigenvalues and shortens every nilpotent chain by one, so
/// simple zeros at infinity come out as eigenvalues at rounding level
/// instead of at its square root.
///
/// The first draw compresses `F` itself; every redraw also moves the
/// expansion point to a random real shift `s`, compressing `F - s*E`
/// instead. A zero at the origin makes the unshifted `G` singular, so
/// without the shift such pencils would never pass the conditioning test.
pub fn finite_zero_candidates(
    pencil: &MatrixPencil,
    policy: &TolerancePolicy,
    seed: u64,
    normal_rank: usize,
) -> Result<Vec<C64>> {
    if normal_rank == 0 {
        return Ok(Vec::new());
    }
    let (rows, cols) = pencil.shape();
    let Some((left, right)) = rank_factors(&pencil.e, policy) else {
        return Ok(Vec::new());
    };
    let mut rng = SeededRng::new(seed, Stream::Compression);
    let attempts = policy.resample_limit + 1;
    for attempt in 0..attempts {
        let u = rng.normal_matrix(normal_rank, rows);
        let v = rng.normal_matrix(cols, normal_rank);
        let shift = if attempt == 0 { 0.0 } else { rng.normal() };
        let g = &u * (&pencil.f - &pencil.e * shift) * &v;
        let condition = condition_estimate(&g);
        if condition.is_nan() || condition >= COMPRESSION_CONDITION_LIMIT {
            continue;
        }
        let Some(g_inv_ul) = g.lu().solve(&(&u * &left)) else {
            continue;
        };
        let small = &right * &v * g_inv_ul;
        let raw: Vec<C64> = real_eigenvalues(&small)?
            .into_iter()
            .filter(|l| l.norm() > INFINITE_EIGENVALUE_CUTOFF)
            .map(|l| C64::from(shift) + l.inv())
            .collect();
        return Ok(cluster(&raw, policy.cluster_tol));
    }
    Err(Error::CompressionFailure { attempts })
}

/// `E = L R` with `L = U_r sqrt(S_r)`, `R = sqrt(S_r) V_r^T` over the
/// numerically nonzero singular values; `None` when `E` is zero.
fn rank_factors(e: &DMatrix<f64>, policy: &TolerancePolicy) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let r = numerics::numerical_rank(e, policy);
    if r == 0 {
        return None;
    }
    let svd = e.clone().svd(true, true);
    let (u, vt) = (svd.u?, svd.v_t?);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut left = DMatrix::zeros(e.nrows(), r);
    let mut right = DMatrix::zeros(r, e.ncols());
    for (k, &i) in order.iter().take(r).enumerate() {
        let s = svd.singular_values[i].sqrt();
        left.set_column(k, &(u.column(i) * s));
        right.set_row(k, &(vt.row(i) * s));
    }
    Some((left, right))
}

/// Merges points closer than `tol` to a running cluster mean.
fn cluster(points: &[C64], tol: f64) -> Vec<C64> {
    let mut groups: Vec<(C64, usize)> = Vec::new();
    for &p in points {
        match groups
            .iter_mut()
            .find(|(sum, count)| (*sum / *count as f64 - p).norm() <= tol)
        {
            Some((sum, count)) => {
                *sum += p;
                *count += 1;
            }
            None => groups.push((p, 1)),
        }
    }
    groups
        .into_iter()
        .map(|(sum, count)| sum / count as f64)
        .collect()
}

/// Geometric multiplicity of `z0` as a zero: `max(0, rho - rank(z0 E - F))`.
pub fn verify_zero(
    pencil: &MatrixPencil,
    z0: C64,
    policy: &TolerancePolicy,
    normal_rank: usize,
) -> usize {
    normal_rank.saturating_sub(rank_at(pencil, z0, policy))
}

pub fn zero_report(blk: &BlockedSystem, policy: &TolerancePolicy, seed: u64) -> Result<ZeroReport> {
    let pencil = blk.system_pencil();
    let rho = normal_rank(&pencil, policy, seed);
    let rank_at_zero = rank_at(&pencil, C64::new(0.0, 0.0), policy);
    let rank_at_infinity = numerics::rank_at_infinity(blk, policy);

    let candidates = finite_zero_candidates(&pencil, policy, seed, rho)?;
    let mut finite_nonzero_zeros = Vec::new();
    let mut boundary_candidates = Vec::new();
    let mut far_candidates = Vec::new();
    for &z in &candidates {
        let radius = z.norm();
        if radius <= policy.zero_radius {
            continue;
        }
        let multiplicity = verify_zero(&pencil, z, policy, rho);
        let located = LocatedZero {
            location: z.into(),
            multiplicity,
        };
        if radius * policy.zero_radius >= 1.0 {
            far_candidates.push(located);
            continue;
        }
        if radius <= policy.cluster_tol {
            boundary_candidates.push(located.clone());
        }
        if multiplicity > 0 {
            finite_nonzero_zeros.push(located);
        }
    }

    Ok(ZeroReport {
        tau: blk.tau,
        normal_rank: rho,
        rank_at_zero,
        rank_at_infinity,
        mult_at_zero: rho.saturating_sub(rank_at_zero),
        mult_at_infinity: rho.saturating_sub(rank_at_infinity),
        finite_nonzero_zeros,
        boundary_candidates,
        far_candidates,
        candidates_examined: candidates.len(),
        seed,
    })
}

/// Zeros of a blocked system with square invertible feedthrough: the
/// eigenvalues of `A - B D^-1 C`.
pub fn square_blocked_zeros(blk: &BlockedSystem, policy: &TolerancePolicy) -> Result<Vec<C64>> {
    let d = &blk.d;
    if !d.is_square() {
        return Err(Error::SingularD(format!(
            "feedthrough is {}x{}, not square",
            d.nrows(),
            d.ncols()
        )));
    }
    let condition = condition_estimate(d);
    if condition.is_nan() || condition >= policy.condition_cap {
        return Err(Error::SingularD(format!(
            "feedthrough condition number {condition:.3e}"
        )));
    }
    let d_inv_c: DMatrix<f64> = d
        .clone()
        .lu()
        .solve(&blk.c)
        .ok_or_else(|| Error::SingularD("LU solve failed".into()))?;
    real_eigenvalues(&(&blk.a - &blk.b * d_inv_c))
}
