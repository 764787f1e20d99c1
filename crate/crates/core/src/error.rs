use thiserror::Error;

/// Everything that can go wrong inside the simulator.
///
/// The variants are grouped by how a caller is expected to react: fix the
/// input (`InvalidDimension`, `DimensionMismatch`, `InvalidState`,
/// `InvalidArgument`), raise a truncation (`InsufficientDimension`,
/// `KrausCutoff`), shrink the step (`Integrator`) or sample more
/// (`Unreachable`, `SelectionFailure`, `LowConfidence`).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("Fock dimension must be at least 2, got {0}")]
    InvalidDimension(usize),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered in {0}")]
    Numeric(&'static str),

    #[error("operator is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("truncation too small: {leaked:.3e} of the weight lies beyond dim {dim}")]
    InsufficientDimension { dim: usize, leaked: f64 },

    #[error("loss Kraus cutoff kmax={kmax} too small: tail weight {tail:.3e}")]
    KrausCutoff { kmax: usize, tail: f64 },

    #[error("integrator failure: {reason}; try a step below {suggested_step:.3e} us")]
    Integrator { reason: String, suggested_step: f64 },

    #[error("trajectory unreachable: selection probability {probability:.3e}")]
    Unreachable { probability: f64 },

    #[error("moduli {a} and {b} are not coprime")]
    NotCoprime { a: u64, b: u64 },

    #[error("ambiguous phase outcome {theta} for modulus {modulus}; raw outcomes {outcomes:?}")]
    LowConfidence {
        modulus: u64,
        theta: f64,
        outcomes: Vec<f64>,
    },

    #[error("post-selection failed after {attempts} attempts ({accepted} accepted)")]
    SelectionFailure { attempts: usize, accepted: usize },

    #[error("reference subspace l={l} of modulus {modulus} is empty")]
    UndefinedReference { modulus: usize, l: usize },

    #[error("exhaustive enumeration over m={rounds} rounds is too expensive; use the sampling estimator")]
    EnumerationCost { rounds: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
