//! The unblocked two-rate system and the operations defined directly on it.

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics;
use crate::rng::{SeededRng, Stream};

/// Sizes of a two-rate system.
///
/// `rate` is the ratio `N` between the fast and slow sampling rates; it is
/// spelled `N` in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Dimensions {
    pub n: usize,
    pub m: usize,
    pub p1: usize,
    pub p2: usize,
    #[serde(rename = "N")]
    pub rate: usize,
}

impl Dimensions {
    pub fn new(n: usize, m: usize, p1: usize, p2: usize, rate: usize) -> Result<Self> {
        let dims = Dimensions { n, m, p1, p2, rate };
        dims.check()?;
        Ok(dims)
    }

    pub fn check(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.p1 == 0 || self.p2 == 0 {
            return Err(Error::InvalidDimensions(format!(
                "n, m, p1, p2 must all be positive, got {self}"
            )));
        }
        if self.rate < 2 {
            return Err(Error::InvalidDimensions(format!(
                "rate ratio N must be at least 2, got {}",
                self.rate
            )));
        }
        Ok(())
    }

    /// Total unblocked output dimension `p1 + p2`.
    pub fn p(&self) -> usize {
        self.p1 + self.p2
    }

    /// Rows of the blocked output `N*p1 + p2`.
    pub fn blocked_outputs(&self) -> usize {
        self.rate * self.p1 + self.p2
    }

    /// Columns of the blocked input `N*m`.
    pub fn blocked_inputs(&self) -> usize {
        self.rate * self.m
    }

    pub fn class(&self) -> SystemClass {
        classify(self)
    }

    pub fn check_tau(&self, tau: usize) -> Result<()> {
        if tau == 0 || tau > self.rate {
            return Err(Error::TauOutOfRange {
                tau,
                rate: self.rate,
            });
        }
        Ok(())
    }
}

impl fmt::Display for Dimensions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(n={}, m={}, p1={}, p2={}, N={})",
            self.n, self.m, self.p1, self.p2, self.rate
        )
    }
}

/// Tallness regime of a two-rate system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SystemClass {
    /// `p1 > m`: the fast outputs alone already make the blocked system tall.
    FastTall,
    /// `p1 <= m` and `N*p1 + p2 > N*m`.
    MixedTall,
    NotTall,
}

impl SystemClass {
    pub fn is_tall(self) -> bool {
        !matches!(self, SystemClass::NotTall)
    }

    pub fn label(self) -> &'static str {
        match self {
            SystemClass::FastTall => "FastTall",
            SystemClass::MixedTall => "MixedTall",
            SystemClass::NotTall => "NotTall",
        }
    }
}

pub fn classify(dims: &Dimensions) -> SystemClass {
    if dims.p1 > dims.m {
        SystemClass::FastTall
    } else if dims.blocked_outputs() > dims.blocked_inputs() {
        SystemClass::MixedTall
    } else {
        SystemClass::NotTall
    }
}

/// Thresholds used by every numerical rank decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TolerancePolicy {
    /// A singular value counts if it exceeds `rel_rank_tol * sigma_max * max(rows, cols)`.
    pub rel_rank_tol: f64,
    /// Candidates with `|Z| <= zero_radius` are attributed to the origin.
    pub zero_radius: f64,
    /// Candidate zeros closer than this are merged.
    pub cluster_tol: f64,
    pub normal_rank_samples: usize,
    pub resample_limit: usize,
    /// Largest condition estimate accepted for `A`, `ZI - A_tau` and `D_tau` inversions.
    pub condition_cap: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        TolerancePolicy {
            rel_rank_tol: 1e-9,
            zero_radius: 1e-8,
            cluster_tol: 1e-6,
            normal_rank_samples: 7,
            resample_limit: 5,
            condition_cap: 1e10,
        }
    }
}

impl TolerancePolicy {
    pub fn check(&self) -> Result<()> {
        let reals = [
            ("rel_rank_tol", self.rel_rank_tol),
            ("zero_radius", self.zero_radius),
            ("cluster_tol", self.cluster_tol),
            ("condition_cap", self.condition_cap),
        ];
        for (name, value) in reals {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidPolicy(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if self.normal_rank_samples < 3 {
            return Err(Error::InvalidPolicy(format!(
                "normal_rank_samples must be at least 3, got {}",
                self.normal_rank_samples
            )));
        }
        if self.resample_limit == 0 {
            return Err(Error::InvalidPolicy("resample_limit must be positive".into()));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let policy: TolerancePolicy = serde_json::from_str(&text)?;
        policy.check()?;
        Ok(policy)
    }
}

/// Unblocked two-rate system `{A, B, Cf, Cs, Df, Ds}`.
///
/// Fields are public so that malformed systems can be represented and
/// reported by [`validate`]; [`MultirateSystem::new`] is the checked
/// constructor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemFile", into = "SystemFile")]
pub struct MultirateSystem {
    pub dims: Dimensions,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub cf: DMatrix<f64>,
    pub cs: DMatrix<f64>,
    pub df: DMatrix<f64>,
    pub ds: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Dimensions {
        message: String,
    },
    Shape {
        field: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    NonFinite {
        field: String,
        row: usize,
        col: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dimensions { message } => write!(f, "{message}"),
            Violation::Shape {
                field,
                expected,
                found,
            } => write!(
                f,
                "{field}: expected shape {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Violation::NonFinite { field, row, col } => {
                write!(f, "{field}: non-finite entry at ({row}, {col})")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub violations: Vec<Violation>,
}

impl ValidationResult {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl MultirateSystem {
    pub fn new(
        dims: Dimensions,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        cf: DMatrix<f64>,
        cs: DMatrix<f64>,
        df: DMatrix<f64>,
        ds: DMatrix<f64>,
    ) -> Result<Self> {
        let sys = MultirateSystem {
            dims,
            a,
            b,
            cf,
            cs,
            df,
            ds,
        };
        let report = validate(&sys);
        if !report.is_ok() {
            let msg: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::InvalidSystem(msg.join("; ")));
        }
        Ok(sys)
    }

    /// The stacked output matrix `[Cf; Cs]`.
    pub fn c(&self) -> DMatrix<f64> {
        stack_rows(&self.cf, &self.cs)
    }

    /// The stacked feedthrough `[Df; Ds]`.
    pub fn d(&self) -> DMatrix<f64> {
        stack_rows(&self.df, &self.ds)
    }

    fn fields(&self) -> [(&'static str, &DMatrix<f64>, (usize, usize)); 6] {
        let Dimensions { n, m, p1, p2, .. } = self.dims;
        [
            ("A", &self.a, (n, n)),
            ("B", &self.b, (n, m)),
            ("Cf", &self.cf, (p1, n)),
            ("Cs", &self.cs, (p2, n)),
            ("Df", &self.df, (p1, m)),
            ("Ds", &self.ds, (p2, m)),
        ]
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn stack_rows(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

/// Shape and finiteness check. Violations are returned as data.
pub fn validate(sys: &MultirateSystem) -> ValidationResult {
    let mut violations = Vec::new();
    if let Err(e) = sys.dims.check() {
        violations.push(Violation::Dimensions {
            message: e.to_string(),
        });
    }
    for (field, mat, expected) in sys.fields() {
        let found = mat.shape();
        if found != expected {
            violations.push(Violation::Shape {
                field: field.to_string(),
                expected,
                found,
            });
        }
        for r in 0..mat.nrows() {
            for c in 0..mat.ncols() {
                if !mat[(r, c)].is_finite() {
                    violations.push(Violation::NonFinite {
                        field: field.to_string(),
                        row: r,
                        col: c,
                    });
                }
            }
        }
    }
    ValidationResult { violations }
}

/// Generic instance with i.i.d. standard normal entries.
///
/// Draw order on the system stream of `seed`: `A, B, Cf, Cs, Df, Ds`, each
/// row-major.
pub fn random_generic(dims: &Dimensions, seed: u64) -> MultirateSystem {
    let Dimensions { n, m, p1, p2, .. } = *dims;
    let mut rng = SeededRng::new(seed, Stream::System);
    let a = rng.normal_matrix(n, n);
    let b = rng.normal_matrix(n, m);
    let cf = rng.normal_matrix(p1, n);
    let cs = rng.normal_matrix(p2, n);
    let df = rng.normal_matrix(p1, m);
    let ds = rng.normal_matrix(p2, m);
    MultirateSystem {
        dims: *dims,
        a,
        b,
        cf,
        cs,
        df,
        ds,
    }
}

/// Inverse of `A` guarded by `policy.condition_cap`.
pub(crate) fn guarded_inverse(a: &DMatrix<f64>, policy: &TolerancePolicy) -> Result<DMatrix<f64>> {
    let condition = numerics::condition_estimate(a);
    if condition.is_nan() || condition >= policy.condition_cap {
        return Err(Error::SingularA { condition });
    }
    a.clone()
        .try_inverse()
        .ok_or(Error::SingularA { condition })
}

/// The system run backwards in time:
/// `{A^-1, -A^-1 B, Cf A^-1, Df - Cf A^-1 B, Cs A^-1, Ds - Cs A^-1 B}`.
pub fn reverse_time(sys: &MultirateSystem, policy: &TolerancePolicy) -> Result<MultirateSystem> {
    let a_inv = guarded_inverse(&sys.a, policy)?;
    let a_inv_b = &a_inv * &sys.b;
    Ok(MultirateSystem {
        dims: sys.dims,
        b: -&a_inv_b,
        cf: &sys.cf * &a_inv,
        df: &sys.df - &sys.cf * &a_inv_b,
        cs: &sys.cs * &a_inv,
        ds: &sys.ds - &sys.cs * &a_inv_b,
        a: a_inv,
    })
}

/// `[B, AB, ..., A^(nu-1) B]`.
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>, nu: usize) -> DMatrix<f64> {
    let (n, m) = b.shape();
    let mut out = DMatrix::zeros(n, nu * m);
    let mut block = b.clone();
    for k in 0..nu {
        out.columns_mut(k * m, m).copy_from(&block);
        block = a * block;
    }
    out
}

/// On-disk JSON layout: integer sizes plus row-major nested arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct SystemFile {
    pub n: usize,
    pub m: usize,
    pub p1: usize,
    pub p2: usize,
    pub N: usize,
    pub A: Vec<Vec<f64>>,
    pub B: Vec<Vec<f64>>,
    pub Cf: Vec<Vec<f64>>,
    pub Cs: Vec<Vec<f64>>,
    pub Df: Vec<Vec<f64>>,
    pub Ds: Vec<Vec<f64>>,
}

fn to_rows(mat: &DMatrix<f64>) -> Vec<Vec<f64>> {
    mat.row_iter()
        .map(|row| row.iter().copied().collect())
        .collect()
}

fn from_rows(field: &str, rows: &[Vec<f64>], expected: (usize, usize)) -> Result<DMatrix<f64>> {
    let (r, c) = expected;
    if rows.len() != r {
        return Err(Error::InvalidSystem(format!(
            "{field}: expected {r} rows, found {}",
            rows.len()
        )));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != c {
            return Err(Error::InvalidSystem(format!(
                "{field}: row {i} has {} entries, expected {c}",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSystem(format!(
                "{field}: non-finite entry at ({i}, {j})"
            )));
        }
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(r, c, &flat))
}

impl TryFrom<SystemFile> for MultirateSystem {
    type Error = Error;

    fn try_from(file: SystemFile) -> Result<Self> {
        let dims = Dimensions::new(file.n, file.m, file.p1, file.p2, file.N)?;
        let Dimensions { n, m, p1, p2, .. } = dims;
        MultirateSystem::new(
            dims,
            from_rows("A", &file.A, (n, n))?,
            from_rows("B", &file.B, (n, m))?,
            from_rows("Cf", &file.Cf, (p1, n))?,
            from_rows("Cs", &file.Cs, (p2, n))?,
            from_rows("Df", &file.Df, (p1, m))?,
            from_rows("Ds", &file.Ds, (p2, m))?,
        )
    }
}

impl From<MultirateSystem> for SystemFile {
    fn from(sys: MultirateSystem) -> Self {
        SystemFile {
            n: sys.dims.n,
            m: sys.dims.m,
            p1: sys.dims.p1,
            p2: sys.dims.p2,
            N: sys.dims.rate,
            A: to_rows(&sys.a),
            B: to_rows(&sys.b),
            Cf: to_rows(&sys.cf),
            Cs: to_rows(&sys.cs),
            Df: to_rows(&sys.df),
            Ds: to_rows(&sys.ds),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dims(n: usize, m: usize, p1: usize, p2: usize, rate: usize) -> Dimensions {
        Dimensions::new(n, m, p1, p2, rate).unwrap()
    }

    #[test]
    fn dimension_bounds() {
        assert!(Dimensions::new(0, 1, 1, 1, 2).is_err());
        assert!(Dimensions::new(1, 1, 1, 1, 1).is_err());
        assert_eq!(dims(1, 3, 1, 5, 2).p(), 6);
    }

    #[test]
    fn well_formed_system_validates() {
        let sys = random_generic(&dims(1, 1, 1, 1, 2), 3);
        assert!(validate(&sys).is_ok());
    }

    #[test]
    fn wrong_shape_of_a_is_reported() {
        let mut sys = random_generic(&dims(2, 1, 1, 1, 2), 3);
        sys.a = DMatrix::zeros(2, 3);
        let report = validate(&sys);
        assert_eq!(
            report.violations,
            vec![Violation::Shape {
                field: "A".into(),
                expected: (2, 2),
                found: (2, 3)
            }]
        );
    }

    #[test]
    fn non_finite_entry_is_reported() {
        let mut sys = random_generic(&dims(2, 2, 1, 1, 2), 3);
        sys.b[(1, 0)] = f64::NAN;
        let report = validate(&sys);
        assert_eq!(
            report.violations,
            vec![Violation::NonFinite {
                field: "B".into(),
                row: 1,
                col: 0
            }]
        );
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify(&dims(1, 3, 1, 5, 2)), SystemClass::MixedTall);
        assert_eq!(classify(&dims(2, 1, 2, 1, 3)), SystemClass::FastTall);
        // 2 + 2 = 4 = N m: strict inequality fails.
        assert_eq!(classify(&dims(1, 2, 1, 2, 2)), SystemClass::NotTall);
    }

    #[test]
    fn random_generic_is_deterministic() {
        let d = dims(3, 2, 1, 4, 3);
        assert_eq!(random_generic(&d, 11), random_generic(&d, 11));
        assert_ne!(random_generic(&d, 11).a, random_generic(&d, 12).a);
    }

    #[test]
    fn random_state_matrix_has_distinct_eigenvalues() {
        let d = dims(4, 1, 1, 1, 2);
        let tol = TolerancePolicy::default().cluster_tol;
        for seed in 0..50 {
            let sys = random_generic(&d, seed);
            let a = sys.a.map(crate::C64::from);
            let eig = numerics::eigenvalues(&a).unwrap();
            for i in 0..eig.len() {
                for j in i + 1..eig.len() {
                    assert!((eig[i] - eig[j]).norm() > tol, "seed {seed}");
                }
            }
        }
    }

    #[test]
    fn reverse_time_identity_state() {
        let d = dims(2, 2, 1, 3, 2);
        let mut sys = random_generic(&d, 5);
        sys.a = DMatrix::identity(2, 2);
        let rev = reverse_time(&sys, &TolerancePolicy::default()).unwrap();
        assert_eq!(rev.a, sys.a);
        assert_eq!(rev.b, -&sys.b);
        assert_eq!(rev.cf, sys.cf);
        assert_relative_eq!(rev.df, &sys.df - &sys.cf * &sys.b, epsilon = 1e-15);
        assert_relative_eq!(rev.ds, &sys.ds - &sys.cs * &sys.b, epsilon = 1e-15);
    }

    #[test]
    fn reverse_time_rejects_singular_a() {
        let d = dims(2, 1, 1, 1, 2);
        let mut sys = random_generic(&d, 5);
        sys.a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            reverse_time(&sys, &TolerancePolicy::default()),
            Err(Error::SingularA { .. })
        ));
    }

    #[test]
    fn controllability_matrix_layout() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 3.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let c = controllability_matrix(&a, &b, 3);
        assert_eq!(c.column(1), (&a * &b).column(0));
        assert_eq!(c.column(2), (&a * &a * &b).column(0));
    }

    #[test]
    fn json_round_trip_and_shape_errors() {
        let sys = random_generic(&dims(2, 3, 1, 4, 2), 9);
        let text = serde_json::to_string(&sys).unwrap();
        let back: MultirateSystem = serde_json::from_str(&text).unwrap();
        assert_eq!(sys, back);

        let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
        value["Cs"] = serde_json::json!([[1.0, 2.0]]);
        let err = serde_json::from_value::<MultirateSystem>(value).unwrap_err();
        assert!(err.to_string().contains("Cs"), "{err}");
    }

    proptest! {
        #[test]
        fn classify_is_total_and_exclusive(
            n in 1usize..8, m in 1usize..8, p1 in 1usize..8, p2 in 1usize..30, rate in 2usize..9
        ) {
            let d = dims(n, m, p1, p2, rate);
            let fast = p1 > m;
            let mixed = p1 <= m && rate * p1 + p2 > rate * m;
            let expected = match (fast, mixed) {
                (true, _) => SystemClass::FastTall,
                (false, true) => SystemClass::MixedTall,
                _ => SystemClass::NotTall,
            };
            prop_assert_eq!(classify(&d), expected);
        }

        #[test]
        fn reverse_time_is_an_involution(seed in any::<u64>(), n in 1usize..5, m in 1usize..4) {
            let d = dims(n, m, 2, 3, 2);
            let sys = random_generic(&d, seed);
            let policy = TolerancePolicy::default();
            prop_assume!(numerics::condition_estimate(&sys.a) < 1e2);
            let back = reverse_time(&reverse_time(&sys, &policy).unwrap(), &policy).unwrap();
            for (x, y) in [(&sys.a, &back.a), (&sys.b, &back.b), (&sys.cf, &back.cf),
                           (&sys.cs, &back.cs), (&sys.df, &back.df), (&sys.ds, &back.ds)] {
                let scale = x.norm().max(1.0);
                prop_assert!((x - y).norm() / scale < 1e-10);
            }
        }
    }
}
