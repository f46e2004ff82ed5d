//! Blocked (lifted) systems and their system-matrix pencils.
//!
//! For blocking delay `tau` the blocked input stacks `u(k+tau) .. u(k+tau+N-1)`
//! and the blocked output stacks the matching fast samples followed by the
//! slow sample `y_s(k+N)`. The state advances `N` steps per blocked step.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{reverse_time, Dimensions, MultirateSystem, TolerancePolicy};
use crate::numerics;
use crate::rng::{SeededRng, Stream};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputSet {
    /// `N*p1` fast rows followed by `p2` slow rows.
    Full,
    /// Slow rows removed.
    FastOnly,
}

/// Time-invariant lift `{A_tau, B_tau, C_tau, D_tau}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockedSystem {
    pub dims: Dimensions,
    pub tau: usize,
    pub outputs: OutputSet,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

/// Affine pencil `P(Z) = Z*E - F`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPencil {
    pub e: DMatrix<f64>,
    pub f: DMatrix<f64>,
}

impl MatrixPencil {
    pub fn new(e: DMatrix<f64>, f: DMatrix<f64>) -> Self {
        assert_eq!(e.shape(), f.shape(), "pencil matrices must share a shape");
        MatrixPencil { e, f }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.e.shape()
    }

    pub fn eval(&self, z: C64) -> DMatrix<C64> {
        self.e.zip_map(&self.f, |e, f| z * e - f)
    }
}

/// `A^0 .. A^max` by repeated multiplication.
fn powers(a: &DMatrix<f64>, max: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(max + 1);
    out.push(DMatrix::identity(a.nrows(), a.ncols()));
    for k in 1..=max {
        let next = &out[k - 1] * a;
        out.push(next);
    }
    out
}

/// Forward lift of `sys` at delay `tau`.
pub fn block(sys: &MultirateSystem, tau: usize) -> Result<BlockedSystem> {
    let dims = sys.dims;
    dims.check_tau(tau)?;
    let Dimensions {
        n,
        m,
        p1,
        p2,
        rate,
    } = dims;
    let pw = powers(&sys.a, rate);

    let mut b = DMatrix::zeros(n, rate * m);
    for j in 0..rate {
        b.columns_mut(j * m, m)
            .copy_from(&(&pw[rate - 1 - j] * &sys.b));
    }

    let rows = dims.blocked_outputs();
    let mut c = DMatrix::zeros(rows, n);
    for i in 0..rate {
        c.rows_mut(i * p1, p1).copy_from(&(&sys.cf * &pw[i]));
    }
    c.rows_mut(rate * p1, p2)
        .copy_from(&(&sys.cs * &pw[rate - tau]));

    let mut d = DMatrix::zeros(rows, rate * m);
    for i in 0..rate {
        d.view_mut((i * p1, i * m), (p1, m)).copy_from(&sys.df);
        for j in 0..i {
            let blk = &sys.cf * &pw[i - j - 1] * &sys.b;
            d.view_mut((i * p1, j * m), (p1, m)).copy_from(&blk);
        }
    }
    // Slow block row: Cs A^(N-tau-1-j) B before the Ds block at column N-tau,
    // zeros after it.
    let lead = rate - tau;
    for j in 0..lead {
        let blk = &sys.cs * &pw[lead - 1 - j] * &sys.b;
        d.view_mut((rate * p1, j * m), (p2, m)).copy_from(&blk);
    }
    d.view_mut((rate * p1, lead * m), (p2, m)).copy_from(&sys.ds);

    Ok(BlockedSystem {
        dims,
        tau,
        outputs: OutputSet::Full,
        a: pw[rate].clone(),
        b,
        c,
        d,
    })
}

/// Lift of the reverse-time system at delay `tau`, in its native layout:
/// inputs ordered `B~, A~B~, ..`, fast rows ordered `C~f A~^(N-1) .. C~f`,
/// upper block-triangular fast feedthrough, and `N - tau` leading zero blocks
/// in the slow feedthrough row.
pub fn block_reverse(
    sys: &MultirateSystem,
    tau: usize,
    policy: &TolerancePolicy,
) -> Result<BlockedSystem> {
    sys.dims.check_tau(tau)?;
    let rev = reverse_time(sys, policy)?;
    let dims = sys.dims;
    let Dimensions {
        n,
        m,
        p1,
        p2,
        rate,
    } = dims;
    let pw = powers(&rev.a, rate);

    let mut b = DMatrix::zeros(n, rate * m);
    for j in 0..rate {
        b.columns_mut(j * m, m).copy_from(&(&pw[j] * &rev.b));
    }

    let rows = dims.blocked_outputs();
    let mut c = DMatrix::zeros(rows, n);
    for i in 0..rate {
        c.rows_mut(i * p1, p1)
            .copy_from(&(&rev.cf * &pw[rate - 1 - i]));
    }
    c.rows_mut(rate * p1, p2)
        .copy_from(&(&rev.cs * &pw[tau - 1]));

    let mut d = DMatrix::zeros(rows, rate * m);
    for i in 0..rate {
        d.view_mut((i * p1, i * m), (p1, m)).copy_from(&rev.df);
        for j in i + 1..rate {
            let blk = &rev.cf * &pw[j - i - 1] * &rev.b;
            d.view_mut((i * p1, j * m), (p1, m)).copy_from(&blk);
        }
    }
    let lead = rate - tau;
    d.view_mut((rate * p1, lead * m), (p2, m)).copy_from(&rev.ds);
    for j in lead + 1..rate {
        let blk = &rev.cs * &pw[j - lead - 1] * &rev.b;
        d.view_mut((rate * p1, j * m), (p2, m)).copy_from(&blk);
    }

    Ok(BlockedSystem {
        dims,
        tau,
        outputs: OutputSet::Full,
        a: pw[rate].clone(),
        b,
        c,
        d,
    })
}

impl BlockedSystem {
    pub fn output_rows(&self) -> usize {
        self.c.nrows()
    }

    /// `E = [[I, 0], [0, 0]]`, `F = [[A, B], [-C, -D]]`, so that
    /// `Z*E - F = [[ZI - A, -B], [C, D]]`.
    pub fn system_pencil(&self) -> MatrixPencil {
        let n = self.dims.n;
        let rows = n + self.output_rows();
        let cols = n + self.b.ncols();
        let mut e = DMatrix::zeros(rows, cols);
        e.view_mut((0, 0), (n, n)).fill_with_identity();
        let mut f = DMatrix::zeros(rows, cols);
        f.view_mut((0, 0), (n, n)).copy_from(&self.a);
        f.view_mut((0, n), (n, self.b.ncols())).copy_from(&self.b);
        f.view_mut((n, 0), (self.output_rows(), n))
            .copy_from(&(-&self.c));
        f.view_mut((n, n), self.d.shape()).copy_from(&(-&self.d));
        MatrixPencil::new(e, f)
    }

    /// Removes the slow output rows.
    pub fn fast_subsystem(&self) -> BlockedSystem {
        let fast = self.dims.rate * self.dims.p1;
        BlockedSystem {
            dims: self.dims,
            tau: self.tau,
            outputs: OutputSet::FastOnly,
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.rows(0, fast).into_owned(),
            d: self.d.rows(0, fast).into_owned(),
        }
    }

    /// Reverses the order of the input blocks and of the fast output blocks.
    ///
    /// Applied to [`block_reverse`] at delay `tau`, the result has exactly
    /// the layout of [`block`] at delay `N - tau + 1` for the reverse-time
    /// system.
    pub fn reversed_layout(&self) -> BlockedSystem {
        let Dimensions { m, p1, rate, .. } = self.dims;
        let mut b = self.b.clone();
        let mut d = self.d.clone();
        for j in 0..rate {
            let src = rate - 1 - j;
            b.columns_mut(j * m, m)
                .copy_from(&self.b.columns(src * m, m));
            d.columns_mut(j * m, m)
                .copy_from(&self.d.columns(src * m, m));
        }
        let mut c = self.c.clone();
        let d_cols = d.clone();
        for i in 0..rate {
            let src = rate - 1 - i;
            c.rows_mut(i * p1, p1)
                .copy_from(&self.c.rows(src * p1, p1));
            d.rows_mut(i * p1, p1)
                .copy_from(&d_cols.rows(src * p1, p1));
        }
        BlockedSystem {
            b,
            c,
            d,
            ..self.clone()
        }
    }

    /// `V(Z) = C (ZI - A)^-1 B + D`.
    pub fn transfer_eval(&self, z: C64, policy: &TolerancePolicy) -> Result<DMatrix<C64>> {
        let n = self.dims.n;
        let resolvent = DMatrix::<C64>::identity(n, n) * z - self.a.map(C64::from);
        let condition = numerics::condition_estimate(&resolvent);
        if condition.is_nan() || condition >= policy.condition_cap {
            return Err(Error::ResolventSingular { z, condition });
        }
        let rhs = self.b.map(C64::from);
        let x = resolvent
            .lu()
            .solve(&rhs)
            .ok_or(Error::ResolventSingular { z, condition })?;
        Ok(self.c.map(C64::from) * x + self.d.map(C64::from))
    }
}

pub fn transfer_eval(blk: &BlockedSystem, z: C64, policy: &TolerancePolicy) -> Result<DMatrix<C64>> {
    blk.transfer_eval(z, policy)
}

/// Output-side shift relating the delay-`tau` and delay-`tau+1` lifts.
fn output_shift(dims: &Dimensions, z: C64) -> DMatrix<C64> {
    let Dimensions { p1, p2, rate, .. } = *dims;
    let size = rate * p1 + p2;
    let mut l = DMatrix::zeros(size, size);
    let carried = (rate - 1) * p1;
    for i in 0..carried {
        l[(i, p1 + i)] = C64::from(1.0);
    }
    for i in 0..p1 {
        l[(carried + i, i)] = z;
    }
    for i in 0..p2 {
        l[(rate * p1 + i, rate * p1 + i)] = C64::from(1.0);
    }
    l
}

/// Input-side shift relating the delay-`tau` and delay-`tau+1` lifts.
fn input_shift(dims: &Dimensions, z: C64) -> DMatrix<C64> {
    let Dimensions { m, rate, .. } = *dims;
    let size = rate * m;
    let carried = (rate - 1) * m;
    let mut r = DMatrix::zeros(size, size);
    for i in 0..m {
        r[(i, carried + i)] = z.inv();
    }
    for i in 0..carried {
        r[(m + i, i)] = C64::from(1.0);
    }
    r
}

/// Relative Frobenius residual of `V_{tau+1}(Z) = L(Z) V_tau(Z) R(Z)`.
pub fn lift_relation_residual(
    sys: &MultirateSystem,
    tau: usize,
    z: C64,
    policy: &TolerancePolicy,
) -> Result<f64> {
    let dims = sys.dims;
    if tau == 0 || tau >= dims.rate {
        return Err(Error::TauOutOfRange {
            tau,
            rate: dims.rate - 1,
        });
    }
    if z.norm() == 0.0 {
        return Err(Error::ZeroZ);
    }
    let v_tau = block(sys, tau)?.transfer_eval(z, policy)?;
    let v_next = block(sys, tau + 1)?.transfer_eval(z, policy)?;
    let predicted = output_shift(&dims, z) * v_tau * input_shift(&dims, z);
    let scale = v_next.norm();
    Ok((v_next - predicted).norm() / scale.max(f64::MIN_POSITIVE))
}

/// Largest lift residual over `count` points on the unit circle drawn from
/// the lift stream of `seed`. Points where a resolvent is too ill-conditioned
/// are redrawn, up to `policy.resample_limit` extra draws per point.
pub fn max_lift_residual(
    sys: &MultirateSystem,
    tau: usize,
    count: usize,
    seed: u64,
    policy: &TolerancePolicy,
) -> Result<f64> {
    let mut rng = SeededRng::new(seed ^ (tau as u64).rotate_left(32), Stream::LiftPoints);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let mut attempt = 0;
        loop {
            let z = C64::from_polar(1.0, rng.angle());
            match lift_relation_residual(sys, tau, z, policy) {
                Ok(r) => {
                    worst = worst.max(r);
                    break;
                }
                Err(Error::ResolventSingular { .. }) if attempt < policy.resample_limit => {
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::random_generic;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dims(n: usize, m: usize, p1: usize, p2: usize, rate: usize) -> Dimensions {
        Dimensions::new(n, m, p1, p2, rate).unwrap()
    }

    fn scalar_system(a: f64, b: f64, cf: f64, cs: f64, df: f64, ds: f64) -> MultirateSystem {
        let one = |v: f64| DMatrix::from_element(1, 1, v);
        MultirateSystem::new(
            dims(1, 1, 1, 1, 2),
            one(a),
            one(b),
            one(cf),
            one(cs),
            one(df),
            one(ds),
        )
        .unwrap()
    }

    #[test]
    fn scalar_state_matrix_is_a_to_the_n() {
        let sys = scalar_system(2.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        for tau in 1..=2 {
            assert_eq!(block(&sys, tau).unwrap().a[(0, 0)], 4.0);
        }
    }

    #[test]
    fn scalar_feedthrough_at_last_delay() {
        let (b, cf, df, ds) = (0.7, -1.3, 0.4, 2.1);
        let sys = scalar_system(0.9, b, cf, 0.5, df, ds);
        let blk = block(&sys, 2).unwrap();
        let expected = DMatrix::from_row_slice(3, 2, &[df, 0.0, cf * b, df, ds, 0.0]);
        assert_relative_eq!(blk.d, expected, epsilon = 1e-15);
    }

    #[test]
    fn scalar_lift_by_hand() {
        // tau = 1, N = 2: B_1 = [a b, b], C_1 = [cf; cf a; cs a],
        // D_1 = [[df, 0], [cf b, df], [cs b, ds]].
        let (a, b, cf, cs, df, ds) = (0.9, 0.7, -1.3, 0.5, 0.4, 2.1);
        let blk = block(&scalar_system(a, b, cf, cs, df, ds), 1).unwrap();
        assert_relative_eq!(blk.b, DMatrix::from_row_slice(1, 2, &[a * b, b]), epsilon = 1e-15);
        assert_relative_eq!(
            blk.c,
            DMatrix::from_row_slice(3, 1, &[cf, cf * a, cs * a]),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            blk.d,
            DMatrix::from_row_slice(3, 2, &[df, 0.0, cf * b, df, cs * b, ds]),
            epsilon = 1e-15
        );
    }

    #[test]
    fn tau_bounds() {
        let sys = random_generic(&dims(1, 1, 1, 1, 2), 0);
        assert!(matches!(block(&sys, 0), Err(Error::TauOutOfRange { .. })));
        assert!(matches!(block(&sys, 3), Err(Error::TauOutOfRange { .. })));
        let p = TolerancePolicy::default();
        assert!(matches!(
            block_reverse(&sys, 0, &p),
            Err(Error::TauOutOfRange { .. })
        ));
    }

    #[test]
    fn reverse_slow_feedthrough_with_identity_state() {
        let (b, cs, ds) = (0.7, 0.5, 2.1);
        let sys = scalar_system(1.0, b, -1.3, cs, 0.4, ds);
        let rev = block_reverse(&sys, 1, &TolerancePolicy::default()).unwrap();
        let slow = rev.d.row(2);
        assert_eq!(slow[0], 0.0);
        assert_relative_eq!(slow[1], ds - cs * b, epsilon = 1e-15);
    }

    #[test]
    fn reverse_lift_is_a_permuted_forward_lift() {
        let policy = TolerancePolicy::default();
        for (seed, d) in [
            (1, dims(2, 3, 1, 7, 3)),
            (2, dims(3, 2, 2, 1, 4)),
            (3, dims(1, 1, 1, 1, 2)),
        ] {
            let sys = random_generic(&d, seed);
            let rev_sys = reverse_time(&sys, &policy).unwrap();
            for tau in 1..=d.rate {
                let permuted = block_reverse(&sys, tau, &policy).unwrap().reversed_layout();
                let forward = block(&rev_sys, d.rate - tau + 1).unwrap();
                assert_relative_eq!(permuted.a, forward.a, max_relative = 1e-12);
                assert_relative_eq!(permuted.b, forward.b, max_relative = 1e-12);
                assert_relative_eq!(permuted.c, forward.c, max_relative = 1e-12);
                assert_relative_eq!(permuted.d, forward.d, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn pencil_layout() {
        let sys = random_generic(&dims(1, 2, 1, 3, 2), 4);
        let blk = block(&sys, 1).unwrap();
        let pencil = blk.system_pencil();
        assert_eq!(pencil.shape(), (1 + 2 + 3, 1 + 4));
        let mut e = DMatrix::zeros(6, 5);
        e[(0, 0)] = 1.0;
        assert_eq!(pencil.e, e);
        let at_zero = pencil.eval(C64::from(0.0));
        assert_eq!(at_zero, pencil.f.map(|v| C64::from(-v)));

        let z = C64::new(0.3, -1.1);
        let at_z = pencil.eval(z);
        assert_eq!(at_z[(0, 0)], z - blk.a[(0, 0)]);
        assert_eq!(at_z[(0, 1)], C64::from(-blk.b[(0, 0)]));
        assert_eq!(at_z[(2, 0)], C64::from(blk.c[(1, 0)]));
        assert_eq!(at_z[(3, 2)], C64::from(blk.d[(2, 1)]));
    }

    #[test]
    fn example_system_matrix_pattern() {
        let sys = fixtures::build("example1", &dims(1, 3, 1, 5, 2), 1, 17).unwrap();
        let blk = block(&sys, 1).unwrap();
        let m1 = blk.system_pencil().eval(C64::from(1.0));
        assert_eq!(m1.shape(), (8, 7));
        let a = sys.a[(0, 0)];
        let c = |v: f64| C64::from(v);
        // row 1: [1 - a^2, -a b1, -a b2, -a b3, -b1, -b2, -b3]
        assert_relative_eq!(m1[(0, 0)].re, 1.0 - a * a, epsilon = 1e-14);
        for j in 0..3 {
            assert_relative_eq!(m1[(0, 1 + j)].re, -a * sys.b[(0, j)], epsilon = 1e-14);
            assert_eq!(m1[(0, 4 + j)], c(-sys.b[(0, j)]));
        }
        // row 2: [cf, df1, df2, df3, 0, 0, 0]
        assert_eq!(m1[(1, 0)], c(sys.cf[(0, 0)]));
        for j in 0..3 {
            assert_eq!(m1[(1, 1 + j)], c(sys.df[(0, j)]));
            assert_eq!(m1[(1, 4 + j)], c(0.0));
        }
        // row 3: [cf a, cf b1, cf b2, cf b3, df1, df2, df3]
        assert_relative_eq!(m1[(2, 0)].re, sys.cf[(0, 0)] * a, epsilon = 1e-14);
        // slow rows: [cs_i a, cs_i b_j, ds_ij]
        for i in 0..5 {
            assert_relative_eq!(m1[(3 + i, 0)].re, sys.cs[(i, 0)] * a, epsilon = 1e-14);
            for j in 0..3 {
                assert_relative_eq!(
                    m1[(3 + i, 1 + j)].re,
                    sys.cs[(i, 0)] * sys.b[(0, j)],
                    epsilon = 1e-14
                );
                assert_eq!(m1[(3 + i, 4 + j)], c(sys.ds[(i, j)]));
            }
        }
        let fast = blk.fast_subsystem();
        assert_eq!(fast.output_rows(), 2);
        assert_eq!(fast.system_pencil().shape(), (3, 7));
    }

    #[test]
    fn transfer_function_limits_and_hand_values() {
        let policy = TolerancePolicy::default();
        let sys = random_generic(&dims(3, 2, 1, 4, 3), 8);
        let blk = block(&sys, 2).unwrap();
        let far = blk.transfer_eval(C64::from(1e8), &policy).unwrap();
        let d = blk.d.map(C64::from);
        assert!((&far - &d).norm() / d.norm() < 1e-6);

        // Scalar, A = 1, N = 2, Z = 2, tau = 1: (Z - 1)^-1 = 1.
        let (b, cf, cs, df, ds) = (0.7, -1.3, 0.5, 0.4, 2.1);
        let sys = scalar_system(1.0, b, cf, cs, df, ds);
        let v = block(&sys, 1)
            .unwrap()
            .transfer_eval(C64::from(2.0), &policy)
            .unwrap();
        let want = [
            [cf * b + df, cf * b],
            [cf * b + cf * b, cf * b + df],
            [cs * b + cs * b, cs * b + ds],
        ];
        for i in 0..3 {
            for j in 0..2 {
                assert!((v[(i, j)] - C64::from(want[i][j])).norm() < 1e-14);
            }
        }

        let blk = block(&sys, 1).unwrap();
        assert!(matches!(
            blk.transfer_eval(C64::from(1.0), &policy),
            Err(Error::ResolventSingular { .. })
        ));
    }

    #[test]
    fn lift_relation_examples() {
        let policy = TolerancePolicy::default();
        let sys = random_generic(&dims(3, 2, 1, 4, 3), 31);
        let z = C64::new(0.7, 0.2);
        assert!(lift_relation_residual(&sys, 1, z, &policy).unwrap() < 1e-10);
        assert!(lift_relation_residual(&sys, 2, z, &policy).unwrap() < 1e-10);
        assert!(matches!(
            lift_relation_residual(&sys, 1, C64::from(0.0), &policy),
            Err(Error::ZeroZ)
        ));
        assert!(lift_relation_residual(&sys, 3, z, &policy).is_err());
    }

    #[test]
    fn fast_rows_do_not_depend_on_tau() {
        let sys = random_generic(&dims(2, 3, 2, 5, 4), 12);
        let first = block(&sys, 1).unwrap().fast_subsystem();
        for tau in 2..=4 {
            let other = block(&sys, tau).unwrap().fast_subsystem();
            assert_eq!(first.a, other.a);
            assert_eq!(first.b, other.b);
            assert_eq!(first.c, other.c);
            assert_eq!(first.d, other.d);
        }
    }

    proptest! {
        #[test]
        fn pencil_is_affine(seed in any::<u64>(), re1 in -3.0f64..3.0, im1 in -3.0f64..3.0,
                            re2 in -3.0f64..3.0, im2 in -3.0f64..3.0) {
            let sys = random_generic(&dims(2, 2, 1, 3, 3), seed);
            let pencil = block(&sys, 2).unwrap().system_pencil();
            let (z1, z2) = (C64::new(re1, im1), C64::new(re2, im2));
            let lhs = pencil.eval(z1) + pencil.eval(z2);
            let rhs = pencil.eval(z1 + z2) - pencil.f.map(C64::from);
            prop_assert!((lhs - rhs).norm() < 1e-12 * (1.0 + pencil.f.norm()));
        }

        #[test]
        fn lift_recursion_on_unit_circle(seed in any::<u64>(), theta in 0.0f64..std::f64::consts::TAU) {
            let policy = TolerancePolicy::default();
            let sys = random_generic(&dims(3, 2, 1, 5, 4), seed);
            let z = C64::from_polar(1.0, theta);
            for tau in 1..4 {
                match lift_relation_residual(&sys, tau, z, &policy) {
                    Ok(r) => prop_assert!(r < 1e-9, "tau {} residual {}", tau, r),
                    Err(Error::ResolventSingular { .. }) => {}
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }
}
