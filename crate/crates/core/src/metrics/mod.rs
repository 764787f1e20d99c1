//! Fidelities and the infidelity bookkeeping for syndrome detection.

mod gkp;
mod infidelity;

pub use gkp::{gkp_detection_fidelity, GkpFidelityReport, GkpOutcomeStats};
pub use infidelity::{
    deduction_infidelity, rotation_infidelity, total_infidelity_noisy, BinStats, Estimator, InfidelityReport,
    MAX_ENUMERATED_ROUNDS,
};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fock::{residue_projector, QuantumState};
use crate::scalar::{cr, norm_sqr, Real, C};

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
///
/// Pure arguments short-circuit to overlaps. For two mixed states the value
/// is computed as `‖A†B‖²_*` with `ρ = AA†`, `σ = BB†` taken from the
/// eigendecompositions restricted to each support; this avoids a matrix
/// square root of a nearly singular product and keeps the result accurate
/// to round-off when the states coincide.
pub fn fidelity<R: Real>(rho: &QuantumState<R>, sigma: &QuantumState<R>) -> Result<R> {
    rho.dim().check(sigma.dim())?;
    for s in [rho, sigma] {
        let tr = s.trace();
        if !tr.is_finite() || (tr - R::one()).abs() > R::lit(R::STATE_TOL) * R::lit(1e3) {
            return Err(Error::InvalidState(format!("trace {} is not 1", tr.to_f64_lossy())));
        }
    }
    let f = match (rho.as_pure(), sigma.as_pure()) {
        (Some(a), Some(b)) => norm_sqr(a.dotc(b)),
        (Some(a), None) => a.dotc(&(sigma.as_density().unwrap() * a)).re,
        (None, Some(b)) => b.dotc(&(rho.as_density().unwrap() * b)).re,
        (None, None) => {
            let a = support_factor(rho.as_density().unwrap());
            let b = support_factor(sigma.as_density().unwrap());
            let overlap = a.adjoint() * b;
            let nuclear = overlap
                .singular_values()
                .iter()
                .fold(R::zero(), |s, &x| s + x);
            nuclear * nuclear
        }
    };
    Ok(f.max(R::zero()))
}

/// `√F`, the convention some references quote.
pub fn root_fidelity<R: Real>(rho: &QuantumState<R>, sigma: &QuantumState<R>) -> Result<R> {
    fidelity(rho, sigma).map(|f| f.sqrt())
}

/// `A` with `ρ = AA†`, keeping only eigenvectors with non-negligible weight.
fn support_factor<R: Real>(rho: &DMatrix<C<R>>) -> DMatrix<C<R>> {
    let sym = (rho + rho.adjoint()) * cr(R::lit(0.5));
    let eig = SymmetricEigen::new(sym);
    let max = eig.eigenvalues.iter().cloned().fold(R::zero(), |a, b| a.max(b));
    let cut = max * R::lit(1e-13);
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > cut)
        .collect();
    let mut a = DMatrix::zeros(rho.nrows(), keep.len());
    for (col, &i) in keep.iter().enumerate() {
        let s = cr(eig.eigenvalues[i].sqrt());
        a.set_column(col, &(eig.eigenvectors.column(i) * s));
    }
    a
}

/// `Π_N^l ρ Π_N^l / Tr(…)`, the reference state for residue class `l`.
pub fn reference_error_state<R: Real>(
    rho_in: &QuantumState<R>,
    modulus: usize,
    l: usize,
) -> Result<QuantumState<R>> {
    if modulus == 0 {
        return Err(Error::InvalidArgument("modulus must be positive".into()));
    }
    let proj = residue_projector::<R>(modulus, l, rho_in.dim());
    let mut projected = rho_in.transform(&proj)?;
    let weight = projected.trace();
    if weight <= R::lit(1e-12) {
        return Err(Error::UndefinedReference { modulus, l });
    }
    projected.normalize_in_place();
    Ok(projected)
}
