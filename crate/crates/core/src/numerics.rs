//! Numerical rank and eigenvalue front ends.
//!
//! Exact ranks are replaced by a singular-value count: `sigma_i` counts when
//! `sigma_i > rel_rank_tol * sigma_1 * max(rows, cols)`. Normal rank of a
//! pencil is the largest such rank over a few seeded points on a fixed
//! circle.

use nalgebra::{ComplexField, DMatrix, Schur};
use serde::{Deserialize, Serialize};

use crate::blocking::{BlockedSystem, MatrixPencil};
use crate::error::{Error, Result};
use crate::model::TolerancePolicy;
use crate::rng::{SeededRng, Stream};
use crate::C64;

/// Radius of the circle on which normal-rank samples are drawn.
pub const NORMAL_RANK_RADIUS: f64 = 1.372000091;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankProfile {
    pub normal_rank: usize,
    pub rank_at_zero: usize,
    /// `n + rank(D_tau)`.
    pub rank_at_infinity: usize,
    pub rank_d: usize,
}

/// Singular values in decreasing order.
pub fn singular_values<T>(m: &DMatrix<T>) -> Vec<f64>
where
    T: ComplexField<RealField = f64>,
{
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn numerical_rank<T>(m: &DMatrix<T>, policy: &TolerancePolicy) -> usize
where
    T: ComplexField<RealField = f64>,
{
    let sv = singular_values(m);
    let Some(&largest) = sv.first() else {
        return 0;
    };
    let threshold = policy.rel_rank_tol * largest * m.nrows().max(m.ncols()) as f64;
    sv.iter().filter(|&&s| s > threshold).count()
}

/// `sigma_max / sigma_min` of a square matrix; infinite when singular.
pub fn condition_estimate<T>(m: &DMatrix<T>) -> f64
where
    T: ComplexField<RealField = f64>,
{
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Numerical rank of `Z*E - F`.
///
/// For `|Z| > 1` the rows that meet `E` are divided by `|Z|` first. The
/// exact rank is unchanged, while the largest singular value stays at the
/// scale of the constant blocks instead of growing with `|Z|`, which would
/// otherwise hide them below the relative threshold.
pub fn rank_at(pencil: &MatrixPencil, z: C64, policy: &TolerancePolicy) -> usize {
    let mut m = pencil.eval(z);
    let radius = z.norm();
    if radius > 1.0 {
        for i in 0..pencil.e.nrows() {
            if pencil.e.row(i).iter().any(|&v| v != 0.0) {
                m.row_mut(i).unscale_mut(radius);
            }
        }
    }
    numerical_rank(&m, policy)
}

/// Sampled normal rank: the maximum of [`rank_at`] over
/// `policy.normal_rank_samples` points `Z = NORMAL_RANK_RADIUS * exp(i theta)`
/// with `theta` drawn from the normal-rank stream of `seed`.
pub fn normal_rank(pencil: &MatrixPencil, policy: &TolerancePolicy, seed: u64) -> usize {
    sample_points(policy.normal_rank_samples, seed)
        .into_iter()
        .map(|z| rank_at(pencil, z, policy))
        .max()
        .unwrap_or(0)
}

pub(crate) fn sample_points(count: usize, seed: u64) -> Vec<C64> {
    let mut rng = SeededRng::new(seed, Stream::NormalRank);
    (0..count)
        .map(|_| C64::from_polar(NORMAL_RANK_RADIUS, rng.angle()))
        .collect()
}

pub fn rank_at_infinity(blk: &BlockedSystem, policy: &TolerancePolicy) -> usize {
    blk.dims.n + numerical_rank(&blk.d, policy)
}

pub fn rank_profile(blk: &BlockedSystem, policy: &TolerancePolicy, seed: u64) -> RankProfile {
    let pencil = blk.system_pencil();
    let rank_d = numerical_rank(&blk.d, policy);
    RankProfile {
        normal_rank: normal_rank(&pencil, policy, seed),
        rank_at_zero: rank_at(&pencil, C64::new(0.0, 0.0), policy),
        rank_at_infinity: blk.dims.n + rank_d,
        rank_d,
    }
}

/// All eigenvalues of a square complex matrix, with algebraic multiplicity,
/// from a complex Schur decomposition.
pub fn eigenvalues(m: &DMatrix<C64>) -> Result<Vec<C64>> {
    assert!(m.is_square(), "eigenvalues of a non-square matrix");
    let size = m.nrows();
    match size {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![m[(0, 0)]]),
        _ => {}
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 1000 * size)
        .ok_or(Error::ConvergenceFailure { size })?;
    let (_, t) = schur.unpack();
    Ok((0..size).map(|i| t[(i, i)]).collect())
}

/// Deflation tolerances tried in turn by [`real_eigenvalues`].
const SCHUR_TOLERANCES: [f64; 4] = [f64::EPSILON, 1e2 * f64::EPSILON, 1e4 * f64::EPSILON, 1e6 * f64::EPSILON];

/// Eigenvalues of a real square matrix, from its real Schur form.
///
/// The QR iteration deflates a subdiagonal entry once it is below
/// `tol * (|h_ii| + |h_jj|)`. Next to a repeated eigenvalue that is small
/// compared with the matrix norm this can be out of reach at rounding level,
/// so the iteration is retried with looser tolerances.
pub fn real_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<C64>> {
    assert!(m.is_square(), "eigenvalues of a non-square matrix");
    let size = m.nrows();
    if size == 0 {
        return Ok(Vec::new());
    }
    SCHUR_TOLERANCES
        .iter()
        .find_map(|&tol| Schur::try_new(m.clone(), tol, 1000 * size))
        .map(|s| s.complex_eigenvalues().iter().copied().collect())
        .ok_or(Error::ConvergenceFailure { size })
}
