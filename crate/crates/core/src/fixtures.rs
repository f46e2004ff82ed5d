//! Named structured systems.
//!
//! Each construction implements [`Fixture`] and is looked up by name in a
//! [`FixtureRegistry`]. Besides building systems, a fixture knows the exact
//! rank facts its structure guarantees and can check them
//! ([`Fixture::exactness_checks`]).
//!
//! Built-in fixtures:
//!
//! * `example1`: a generic system with `(n, m, p1, p2, N) = (1, 3, 1, 5, 2)`
//!   whose blocked system matrix is rank deficient.
//! * `shift_small_n`: 0/1 system with `m - p1 <= n <= (N - tau)(m - p1)` for
//!   which `rank D_tau = (N - 1) p1 + m + n`.
//! * `shift_large_n`: 0/1 system with `n > (N - tau)(m - p1)` for which
//!   `rank D_tau = (tau - 1) p1 + (N - tau + 1) m`.
//! * `shift_controllability`: circular-shift pair `(A, B)` whose
//!   controllability matrices have full rank `min(n, nu*m)`; all output
//!   matrices are zero.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::blocking::block;
use crate::error::{Error, Result};
use crate::model::{controllability_matrix, random_generic, Dimensions, MultirateSystem, TolerancePolicy};
use crate::numerics::{normal_rank, numerical_rank};

/// One exact rank fact checked against a fixture instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureCheck {
    pub fixture: String,
    pub dims: Dimensions,
    pub tau: Option<usize>,
    pub nu: Option<usize>,
    pub seed: u64,
    pub quantity: String,
    pub expected: usize,
    pub measured: usize,
    pub pass: bool,
}

pub trait Fixture: Send + Sync {
    fn name(&self) -> &'static str;

    fn build(&self, dims: &Dimensions, tau: usize, seed: u64) -> Result<MultirateSystem>;

    fn exactness_checks(&self, policy: &TolerancePolicy) -> Vec<FixtureCheck>;
}

pub struct FixtureRegistry {
    entries: Vec<Box<dyn Fixture>>,
}

impl Default for FixtureRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl FixtureRegistry {
    pub fn empty() -> Self {
        FixtureRegistry {
            entries: Vec::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(Example1));
        reg.register(Box::new(ShiftSmallN));
        reg.register(Box::new(ShiftLargeN));
        reg.register(Box::new(ShiftControllability));
        reg
    }

    /// Adds a fixture, replacing any existing one with the same name.
    pub fn register(&mut self, fixture: Box<dyn Fixture>) {
        self.entries.retain(|f| f.name() != fixture.name());
        self.entries.push(fixture);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Fixture> {
        self.entries
            .iter()
            .find(|f| f.name() == name)
            .map(|f| f.as_ref())
            .ok_or_else(|| Error::UnknownFixture(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|f| f.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Fixture> {
        self.entries.iter().map(|f| f.as_ref())
    }
}

/// Builds a built-in fixture by name.
pub fn build(name: &str, dims: &Dimensions, tau: usize, seed: u64) -> Result<MultirateSystem> {
    FixtureRegistry::builtin().get(name)?.build(dims, tau, seed)
}

/// `size x size` permutation sending `e_j` to `e_{(j + shift) mod size}`.
pub fn circular_shift(size: usize, shift: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(size, size);
    for j in 0..size {
        a[((j + shift) % size, j)] = 1.0;
    }
    a
}

fn unsupported(fixture: &str, reason: impl Into<String>) -> Error {
    Error::UnsupportedDims {
        fixture: fixture.to_string(),
        reason: reason.into(),
    }
}

fn check(
    fixture: &str,
    dims: Dimensions,
    tau: Option<usize>,
    nu: Option<usize>,
    seed: u64,
    quantity: &str,
    expected: usize,
    measured: usize,
) -> FixtureCheck {
    FixtureCheck {
        fixture: fixture.to_string(),
        dims,
        tau,
        nu,
        seed,
        quantity: quantity.to_string(),
        expected,
        measured,
        pass: expected == measured,
    }
}

/// Shared 0/1 blocks of the two shift constructions: `B` selects the first
/// `m - p1` coordinates, `Cf = 0`, `Df = [0 I_p1]`, `Cs` copies the first
/// `observed` state coordinates and `Ds` places `[I_{m-p1} 0]` right below.
fn shift_outputs(dims: &Dimensions, observed: usize) -> MultirateSystem {
    let Dimensions { n, m, p1, p2, .. } = *dims;
    let r = m - p1;
    let mut b = DMatrix::zeros(n, m);
    for i in 0..r {
        b[(i, i)] = 1.0;
    }
    let mut df = DMatrix::zeros(p1, m);
    for i in 0..p1 {
        df[(i, r + i)] = 1.0;
    }
    let mut cs = DMatrix::zeros(p2, n);
    for i in 0..observed {
        cs[(i, i)] = 1.0;
    }
    let mut ds = DMatrix::zeros(p2, m);
    for i in 0..r {
        ds[(observed + i, i)] = 1.0;
    }
    MultirateSystem {
        dims: *dims,
        a: DMatrix::zeros(n, n),
        b,
        cf: DMatrix::zeros(p1, n),
        cs,
        df,
        ds,
    }
}

/// Tall cases used by the shift fixtures' exactness checks.
fn shift_suite_dims() -> Vec<(Dimensions, usize)> {
    let mut out = Vec::new();
    for m in 2..=4 {
        for p1 in 1..m {
            let r = m - p1;
            for rate in 2..=4 {
                for extra in 1..=2 {
                    let p2 = rate * r + extra;
                    for tau in 1..=rate {
                        for n in 1..=(rate * r + 3) {
                            if let Ok(d) = Dimensions::new(n, m, p1, p2, rate) {
                                out.push((d, tau));
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn rank_d_check(
    fixture: &dyn Fixture,
    dims: &Dimensions,
    tau: usize,
    expected: usize,
    policy: &TolerancePolicy,
) -> Option<FixtureCheck> {
    let sys = fixture.build(dims, tau, 0).ok()?;
    let blk = block(&sys, tau).ok()?;
    Some(check(
        fixture.name(),
        *dims,
        Some(tau),
        None,
        0,
        "rank_D",
        expected,
        numerical_rank(&blk.d, policy),
    ))
}

pub struct Example1;

impl Fixture for Example1 {
    fn name(&self) -> &'static str {
        "example1"
    }

    fn build(&self, dims: &Dimensions, _tau: usize, seed: u64) -> Result<MultirateSystem> {
        let want = Dimensions {
            n: 1,
            m: 3,
            p1: 1,
            p2: 5,
            rate: 2,
        };
        if *dims != want {
            return Err(unsupported(self.name(), format!("requires {want}, got {dims}")));
        }
        Ok(random_generic(dims, seed))
    }

    fn exactness_checks(&self, policy: &TolerancePolicy) -> Vec<FixtureCheck> {
        let dims = Dimensions {
            n: 1,
            m: 3,
            p1: 1,
            p2: 5,
            rate: 2,
        };
        let mut out = Vec::new();
        for seed in 0..5 {
            let sys = random_generic(&dims, seed);
            let blk = block(&sys, 1).expect("tau = 1 is valid");
            let pencil = blk.system_pencil();
            out.push(check(
                self.name(),
                dims,
                Some(1),
                None,
                seed,
                "normal_rank",
                6,
                normal_rank(&pencil, policy, seed),
            ));
            out.push(check(
                self.name(),
                dims,
                Some(1),
                None,
                seed,
                "rank_D",
                5,
                numerical_rank(&blk.d, policy),
            ));
        }
        out
    }
}

pub struct ShiftSmallN;

impl Fixture for ShiftSmallN {
    fn name(&self) -> &'static str {
        "shift_small_n"
    }

    fn build(&self, dims: &Dimensions, tau: usize, _seed: u64) -> Result<MultirateSystem> {
        dims.check()?;
        dims.check_tau(tau)?;
        let Dimensions {
            n, m, p1, p2, rate, ..
        } = *dims;
        if p1 >= m {
            return Err(unsupported(self.name(), "requires p1 < m"));
        }
        let r = m - p1;
        if n < r {
            return Err(unsupported(self.name(), format!("requires n >= m - p1 = {r}")));
        }
        if n > (rate - tau) * r {
            return Err(unsupported(
                self.name(),
                format!("requires n <= (N - tau)(m - p1) = {}", (rate - tau) * r),
            ));
        }
        if p2 < n + r {
            return Err(unsupported(
                self.name(),
                format!("requires p2 >= n + m - p1 = {}", n + r),
            ));
        }
        let mut sys = shift_outputs(dims, n);
        sys.a = circular_shift(n, r);
        Ok(sys)
    }

    fn exactness_checks(&self, policy: &TolerancePolicy) -> Vec<FixtureCheck> {
        let mut out = Vec::new();
        for (dims, tau) in shift_suite_dims() {
            let Ok(sys) = self.build(&dims, tau, 0) else {
                continue;
            };
            let Dimensions { n, m, p1, rate, .. } = dims;
            let expected = (rate - 1) * p1 + m + n;
            out.extend(rank_d_check(self, &dims, tau, expected, policy));

            let orth = &sys.a * sys.a.transpose();
            let identity = DMatrix::identity(n, n);
            out.push(check(
                self.name(),
                dims,
                Some(tau),
                None,
                0,
                "A_orthogonal",
                1,
                usize::from(orth == identity),
            ));

            let reach = controllability_matrix(&sys.a, &sys.b, rate - tau);
            out.push(check(
                self.name(),
                dims,
                Some(tau),
                Some(rate - tau),
                0,
                "controllability_rank",
                n,
                numerical_rank(&reach, policy),
            ));
        }
        out
    }
}

pub struct ShiftLargeN;

impl Fixture for ShiftLargeN {
    fn name(&self) -> &'static str {
        "shift_large_n"
    }

    fn build(&self, dims: &Dimensions, tau: usize, _seed: u64) -> Result<MultirateSystem> {
        dims.check()?;
        dims.check_tau(tau)?;
        let Dimensions {
            n, m, p1, p2, rate, ..
        } = *dims;
        if p1 >= m {
            return Err(unsupported(self.name(), "requires p1 < m"));
        }
        if tau == rate {
            return Err(unsupported(self.name(), "requires tau < N"));
        }
        let r = m - p1;
        let k = (rate - tau) * r;
        if n <= k {
            return Err(unsupported(
                self.name(),
                format!("requires n > (N - tau)(m - p1) = {k}"),
            ));
        }
        if p2 < k + r {
            return Err(unsupported(
                self.name(),
                format!("requires p2 >= (N - tau + 1)(m - p1) = {}", k + r),
            ));
        }
        let mut sys = shift_outputs(dims, k);
        sys.a.view_mut((0, 0), (k, k)).copy_from(&circular_shift(k, r));
        Ok(sys)
    }

    fn exactness_checks(&self, policy: &TolerancePolicy) -> Vec<FixtureCheck> {
        shift_suite_dims()
            .into_iter()
            .filter(|(dims, tau)| self.build(dims, *tau, 0).is_ok())
            .filter_map(|(dims, tau)| {
                let Dimensions { m, p1, rate, .. } = dims;
                let expected = (tau - 1) * p1 + (rate - tau + 1) * m;
                rank_d_check(self, &dims, tau, expected, policy)
            })
            .collect()
    }
}

pub struct ShiftControllability;

impl ShiftControllability {
    pub const MAX_NU: usize = 4;
}

impl Fixture for ShiftControllability {
    fn name(&self) -> &'static str {
        "shift_controllability"
    }

    fn build(&self, dims: &Dimensions, _tau: usize, _seed: u64) -> Result<MultirateSystem> {
        dims.check()?;
        let Dimensions { n, m, p1, p2, .. } = *dims;
        let mut b = DMatrix::zeros(n, m);
        for i in 0..n.min(m) {
            b[(i, i)] = 1.0;
        }
        Ok(MultirateSystem {
            dims: *dims,
            a: circular_shift(n, m),
            b,
            cf: DMatrix::zeros(p1, n),
            cs: DMatrix::zeros(p2, n),
            df: DMatrix::zeros(p1, m),
            ds: DMatrix::zeros(p2, m),
        })
    }

    fn exactness_checks(&self, policy: &TolerancePolicy) -> Vec<FixtureCheck> {
        let mut out = Vec::new();
        for n in 1..=6 {
            for m in 1..=3 {
                let dims = Dimensions {
                    n,
                    m,
                    p1: 1,
                    p2: 1,
                    rate: 2,
                };
                let sys = self.build(&dims, 1, 0).expect("valid dimensions");
                for nu in 1..=Self::MAX_NU {
                    let reach = controllability_matrix(&sys.a, &sys.b, nu);
                    out.push(check(
                        self.name(),
                        dims,
                        None,
                        Some(nu),
                        0,
                        "controllability_rank",
                        crate::oracle::predict_controllability_rank(n, m, nu),
                        numerical_rank(&reach, policy),
                    ));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(n: usize, m: usize, p1: usize, p2: usize, rate: usize) -> Dimensions {
        Dimensions::new(n, m, p1, p2, rate).unwrap()
    }

    #[test]
    fn registry_lookup() {
        let reg = FixtureRegistry::builtin();
        assert_eq!(
            reg.names(),
            vec!["example1", "shift_small_n", "shift_large_n", "shift_controllability"]
        );
        assert!(matches!(reg.get("nope"), Err(Error::UnknownFixture(_))));
    }

    #[test]
    fn circular_shift_moves_basis_vectors() {
        let a = circular_shift(5, 2);
        for j in 0..5 {
            assert_eq!(a[((j + 2) % 5, j)], 1.0);
        }
        assert_eq!(&a * a.transpose(), DMatrix::identity(5, 5));
    }

    #[test]
    fn small_n_example_has_identity_shift() {
        let sys = build("shift_small_n", &dims(2, 3, 1, 5, 2), 1, 0).unwrap();
        assert_eq!(sys.a, DMatrix::identity(2, 2));
        assert_eq!(&sys.a.transpose() * &sys.a, DMatrix::identity(2, 2));
        let blk = block(&sys, 1).unwrap();
        assert_eq!(numerical_rank(&blk.d, &TolerancePolicy::default()), 6);
    }

    #[test]
    fn small_n_gate() {
        let err = build("shift_small_n", &dims(3, 3, 1, 7, 2), 1, 0).unwrap_err();
        assert!(matches!(err, Error::UnsupportedDims { .. }), "{err}");
        assert!(build("shift_small_n", &dims(2, 3, 3, 5, 2), 1, 0).is_err());
    }

    #[test]
    fn large_n_example() {
        let sys = build("shift_large_n", &dims(3, 3, 1, 5, 2), 1, 0).unwrap();
        let blk = block(&sys, 1).unwrap();
        assert_eq!(numerical_rank(&blk.d, &TolerancePolicy::default()), 6);
        assert!(build("shift_large_n", &dims(2, 3, 1, 5, 2), 1, 0).is_err());
    }

    #[test]
    fn example1_gate() {
        assert!(build("example1", &dims(1, 3, 1, 5, 2), 1, 3).is_ok());
        assert!(matches!(
            build("example1", &dims(1, 3, 1, 6, 2), 1, 3),
            Err(Error::UnsupportedDims { .. })
        ));
    }

    #[test]
    fn controllability_fixture_case_one() {
        let sys = build("shift_controllability", &dims(4, 2, 1, 1, 2), 1, 0).unwrap();
        let reach = controllability_matrix(&sys.a, &sys.b, 2);
        assert_eq!(numerical_rank(&reach, &TolerancePolicy::default()), 4);
        assert!(sys.cf.iter().chain(sys.ds.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn every_builtin_check_passes() {
        let policy = TolerancePolicy::default();
        for fixture in FixtureRegistry::builtin().iter() {
            let checks = fixture.exactness_checks(&policy);
            assert!(!checks.is_empty(), "{}", fixture.name());
            for c in checks {
                assert!(c.pass, "{c:?}");
            }
        }
    }
}
