//! Adaptive quantum phase estimation on a qubit-coupled bosonic mode.
//!
//! The crate simulates iterative Ramsey phase estimation as a chain of
//! two-outcome Kraus channels on a truncated Fock space, and uses it to
//! detect errors in rotation-symmetric (cat, binomial) and GKP codes, to
//! prepare code words by post-selection, and to detect or herald large Fock
//! states with coprime moduli.

pub mod codes;
pub mod crt;
pub mod error;
pub mod fock;
pub mod metrics;
pub mod noise;
pub mod qpe;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use fock::{FockDim, OperatorMatrix, QuantumState};
pub use scalar::Real;

pub use num_complex::Complex;

pub type State = QuantumState<f64>;
pub type StateF32 = QuantumState<f32>;
pub type Operator = OperatorMatrix<f64>;
pub type OperatorF32 = OperatorMatrix<f32>;
pub type Complex64 = Complex<f64>;
