//! Seeded random streams.
//!
//! Every random quantity in the crate comes from a ChaCha20 keystream. The
//! 256-bit key is expanded from the 64-bit seed with `rand_core`'s
//! `seed_from_u64` (a PCG32 expansion), and each consumer uses its own
//! ChaCha stream id so that, for one seed, system generation, normal-rank
//! sampling and compression draws never overlap. ChaCha is counter based
//! and its output does not depend on the platform's endianness or word size.
//!
//! Normal deviates use `rand_distr::StandardNormal` (ziggurat); uniform
//! angles use `rand`'s `[0, 1)` `f64` sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// Stream ids. Values are part of the reproducibility contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    System = 1,
    NormalRank = 2,
    Compression = 3,
    LiftPoints = 4,
    Auxiliary = 5,
}

pub struct SeededRng(ChaCha20Rng);

impl SeededRng {
    pub fn new(seed: u64, stream: Stream) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream as u64);
        SeededRng(rng)
    }

    pub fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    /// Uniform angle on `[0, 2*pi)`.
    pub fn angle(&mut self) -> f64 {
        std::f64::consts::TAU * self.uniform()
    }

    /// `rows x cols` matrix of standard normals, filled row-major.
    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> nalgebra::DMatrix<f64> {
        let data: Vec<f64> = (0..rows * cols).map(|_| self.normal()).collect();
        nalgebra::DMatrix::from_row_slice(rows, cols, &data)
    }
}
