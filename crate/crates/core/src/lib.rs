//! Zeros of blocked (lifted) tall multirate linear systems.
//!
//! A two-rate system `x(k+1) = A x(k) + B u(k)` with fast outputs
//! `y_f = Cf x + Df u` observed every step and slow outputs `y_s = Cs x + Ds u`
//! observed every `N` steps is lifted into one of `N` time-invariant blocked
//! systems, indexed by the blocking delay `tau`. This crate builds those
//! blocked systems, measures the rank structure of their system-matrix
//! pencils (normal rank, finite zeros, multiplicities at the origin and at
//! infinity), and compares every measurement with closed-form predictions
//! that hold for generic parameter matrices.
//!
//! Module map:
//!
//! * [`model`]: the unblocked system, validation, classification, seeded
//!   random instances and the reverse-time transform.
//! * [`fixtures`]: named structured constructions behind a registry.
//! * [`blocking`]: blocked systems, system pencils, transfer evaluation.
//! * [`numerics`]: numerical rank and eigenvalue front ends.
//! * [`zeros`]: zero search and the per-system [`zeros::ZeroReport`].
//! * [`oracle`]: generic-case predictions.
//! * [`harness`]: Monte Carlo sweeps, fixture suite and report output.

pub mod blocking;
pub mod error;
pub mod fixtures;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod rng;
pub mod zeros;

pub use blocking::{BlockedSystem, MatrixPencil, OutputSet};
pub use error::{Error, Result};
pub use model::{Dimensions, MultirateSystem, SystemClass, TolerancePolicy};
pub use numerics::RankProfile;
pub use oracle::TheoryPrediction;
pub use zeros::ZeroReport;

/// Complex scalar used for pencil and transfer-function evaluation.
pub type C64 = num_complex::Complex64;
