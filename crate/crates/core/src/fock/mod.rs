//! Truncated Fock space: states, operators and the matrix functions built on
//! them.
//!
//! Conventions: `a|n⟩ = √n |n−1⟩`, `Q = (a+a†)/√2`, `P = −i(a−a†)/√2`,
//! so `[Q, P] = i` away from the truncation edge.

mod expm;
mod hermite;
mod ops;
mod wigner;

pub use expm::{matrix_exp, HermitianSpectrum};
pub use hermite::{position_density, position_eigenvector};
pub use ops::{
    annihilation, displacement, envelope, ladder_operators, momentum, number_operator, parity,
    position, quadrature, residue_projector, rotation, squeeze,
};
pub use wigner::wigner;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::{cabs, cr, max_abs, norm_sqr, Real, C};

/// Number of Fock levels kept, `|0⟩ … |dim−1⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockDim(usize);

impl FockDim {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(FockDim(dim))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }

    /// Levels below the truncation edge: everything except the top 5%.
    /// Unitarity and commutator checks are only meaningful on this block.
    pub fn interior(self) -> usize {
        let edge = (self.0 as f64 * 0.05).ceil() as usize;
        (self.0 - edge).max(1)
    }

    pub(crate) fn check(self, other: FockDim) -> Result<()> {
        if self != other {
            return Err(Error::DimensionMismatch {
                left: self.0,
                right: other.0,
            });
        }
        Ok(())
    }
}

impl fmt::Display for FockDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Repr<R: Real> {
    Pure(DVector<C<R>>),
    Density(DMatrix<C<R>>),
}

/// A normalized mode state, kept as a ket while it stays pure.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState<R: Real> {
    repr: Repr<R>,
}

impl<R: Real> QuantumState<R> {
    /// Normalizes `amplitudes` into a pure state.
    pub fn pure(amplitudes: DVector<C<R>>) -> Result<Self> {
        FockDim::new(amplitudes.len())?;
        let norm = amplitudes.norm();
        if !norm.is_finite() {
            return Err(Error::Numeric("state amplitudes"));
        }
        if norm <= R::lit(1e-300) {
            return Err(Error::InvalidState("zero vector".into()));
        }
        Ok(Self::pure_unchecked(amplitudes * cr(R::one() / norm)))
    }

    /// Wraps a density matrix after checking Hermiticity, unit trace and
    /// positivity.
    pub fn density(matrix: DMatrix<C<R>>) -> Result<Self> {
        let s = Self::density_unchecked(matrix);
        s.validate()?;
        Ok(s)
    }

    pub(crate) fn pure_unchecked(v: DVector<C<R>>) -> Self {
        QuantumState { repr: Repr::Pure(v) }
    }

    pub(crate) fn density_unchecked(m: DMatrix<C<R>>) -> Self {
        QuantumState {
            repr: Repr::Density(m),
        }
    }

    pub fn fock(n: usize, dim: FockDim) -> Result<Self> {
        if n >= dim.get() {
            return Err(Error::InsufficientDimension {
                dim: dim.get(),
                leaked: 1.0,
            });
        }
        let mut v = DVector::zeros(dim.get());
        v[n] = cr(R::one());
        Ok(Self::pure_unchecked(v))
    }

    pub fn vacuum(dim: FockDim) -> Self {
        Self::fock(0, dim).expect("dim >= 2")
    }

    /// Mixture `Σ w_i ρ_i` of states with the same dimension; the weights are
    /// normalized.
    pub fn mixture(parts: &[(R, &QuantumState<R>)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?;
        let dim = first.1.dim();
        let mut acc = DMatrix::zeros(dim.get(), dim.get());
        let mut total = R::zero();
        for (w, s) in parts {
            dim.check(s.dim())?;
            if *w < R::zero() {
                return Err(Error::InvalidArgument("negative mixture weight".into()));
            }
            acc += s.density_matrix() * cr(*w);
            total += *w;
        }
        if total <= R::zero() {
            return Err(Error::InvalidArgument("mixture weights sum to zero".into()));
        }
        Ok(Self::density_unchecked(acc * cr(R::one() / total)))
    }

    pub fn dim(&self) -> FockDim {
        FockDim(match &self.repr {
            Repr::Pure(v) => v.len(),
            Repr::Density(m) => m.nrows(),
        })
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.repr, Repr::Pure(_))
    }

    pub fn as_pure(&self) -> Option<&DVector<C<R>>> {
        match &self.repr {
            Repr::Pure(v) => Some(v),
            Repr::Density(_) => None,
        }
    }

    pub fn as_density(&self) -> Option<&DMatrix<C<R>>> {
        match &self.repr {
            Repr::Pure(_) => None,
            Repr::Density(m) => Some(m),
        }
    }

    /// `ρ` as a matrix, forming `|ψ⟩⟨ψ|` for pure states.
    pub fn density_matrix(&self) -> DMatrix<C<R>> {
        match &self.repr {
            Repr::Pure(v) => v * v.adjoint(),
            Repr::Density(m) => m.clone(),
        }
    }

    pub fn into_density(self) -> Self {
        match self.repr {
            Repr::Pure(v) => Self::density_unchecked(&v * v.adjoint()),
            Repr::Density(_) => self,
        }
    }

    pub fn populations(&self) -> Vec<R> {
        match &self.repr {
            Repr::Pure(v) => v.iter().map(|z| norm_sqr(*z)).collect(),
            Repr::Density(m) => (0..m.nrows()).map(|i| m[(i, i)].re).collect(),
        }
    }

    pub fn trace(&self) -> R {
        match &self.repr {
            Repr::Pure(v) => v.norm_squared(),
            Repr::Density(m) => m.trace().re,
        }
    }

    pub fn expectation(&self, op: &OperatorMatrix<R>) -> Result<C<R>> {
        self.dim().check(op.dim())?;
        Ok(match &self.repr {
            Repr::Pure(v) => v.dotc(&(&op.m * v)),
            Repr::Density(m) => (&op.m * m).trace(),
        })
    }

    /// Expectation of an operator diagonal in the Fock basis, `Σ f(n) ρ_nn`.
    pub fn expect_diagonal(&self, f: impl Fn(usize) -> R) -> R {
        self.populations()
            .into_iter()
            .enumerate()
            .fold(R::zero(), |acc, (n, p)| acc + f(n) * p)
    }

    pub fn mean_photon_number(&self) -> R {
        self.expect_diagonal(|n| R::from_usize(n).unwrap())
    }

    pub fn purity(&self) -> R {
        match &self.repr {
            Repr::Pure(v) => v.norm_squared() * v.norm_squared(),
            Repr::Density(m) => m.iter().map(|z| norm_sqr(*z)).fold(R::zero(), |a, b| a + b),
        }
    }

    /// `U ρ U†` (or `U|ψ⟩`), without renormalizing.
    pub fn transform(&self, op: &OperatorMatrix<R>) -> Result<Self> {
        self.dim().check(op.dim())?;
        Ok(match &self.repr {
            Repr::Pure(v) => Self::pure_unchecked(&op.m * v),
            Repr::Density(m) => Self::density_unchecked(&op.m * m * op.m.adjoint()),
        })
    }

    /// A copy rescaled to unit trace, e.g. after a non-unitary `transform`.
    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if !t.is_finite() || t <= R::lit(1e-300) {
            return Err(Error::InvalidState("cannot normalize a state with zero trace".into()));
        }
        let mut out = self.clone();
        out.normalize_in_place();
        Ok(out)
    }

    /// Rescales to unit trace and returns the trace that was removed.
    pub(crate) fn normalize_in_place(&mut self) -> R {
        let t = self.trace();
        match &mut self.repr {
            Repr::Pure(v) => {
                let n = t.sqrt();
                *v *= cr(R::one() / n);
            }
            Repr::Density(m) => *m *= cr(R::one() / t),
        }
        t
    }

    /// Checks the state invariants at the tolerances of `R`.
    pub fn validate(&self) -> Result<()> {
        let tol = R::lit(R::STATE_TOL);
        match &self.repr {
            Repr::Pure(v) => {
                if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::Numeric("state amplitudes"));
                }
                let n = v.norm_squared();
                if (n - R::one()).abs() > tol {
                    return Err(Error::InvalidState(format!(
                        "norm² {} differs from 1",
                        n.to_f64_lossy()
                    )));
                }
            }
            Repr::Density(m) => {
                if !m.is_square() {
                    return Err(Error::InvalidState("non-square density matrix".into()));
                }
                FockDim::new(m.nrows())?;
                if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::Numeric("density matrix"));
                }
                let herm = max_abs((m - m.adjoint()).iter());
                if herm > tol {
                    return Err(Error::InvalidState(format!(
                        "not Hermitian (deviation {:.3e})",
                        herm.to_f64_lossy()
                    )));
                }
                let tr = m.trace();
                if (tr.re - R::one()).abs() > tol || tr.im.abs() > tol {
                    return Err(Error::InvalidState(format!(
                        "trace {} differs from 1",
                        tr.re.to_f64_lossy()
                    )));
                }
                let sym = (m + m.adjoint()) * cr(R::lit(0.5));
                let min = sym
                    .symmetric_eigenvalues()
                    .iter()
                    .cloned()
                    .fold(R::max_value().unwrap(), |a, b| a.min(b));
                if min < -R::lit(R::PSD_TOL) {
                    return Err(Error::InvalidState(format!(
                        "negative eigenvalue {:.3e}",
                        min.to_f64_lossy()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Converts the scalar type, e.g. to run a single-precision copy of a
    /// double-precision state.
    pub fn cast<S: Real>(&self) -> QuantumState<S> {
        let conv = |z: &C<R>| Complex::new(S::lit(z.re.to_f64_lossy()), S::lit(z.im.to_f64_lossy()));
        match &self.repr {
            Repr::Pure(v) => QuantumState::pure_unchecked(v.map(|z| conv(&z))),
            Repr::Density(m) => QuantumState::density_unchecked(m.map(|z| conv(&z))),
        }
    }
}

/// Dense operator on the truncated Fock space.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix<R: Real> {
    m: DMatrix<C<R>>,
}

impl<R: Real> OperatorMatrix<R> {
    pub fn new(m: DMatrix<C<R>>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidArgument(format!(
                "operator must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        FockDim::new(m.nrows())?;
        Ok(OperatorMatrix { m })
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<C<R>>) -> Self {
        OperatorMatrix { m }
    }

    pub fn identity(dim: FockDim) -> Self {
        OperatorMatrix {
            m: DMatrix::identity(dim.get(), dim.get()),
        }
    }

    pub fn zeros(dim: FockDim) -> Self {
        OperatorMatrix {
            m: DMatrix::zeros(dim.get(), dim.get()),
        }
    }

    pub fn from_diagonal(diag: &[C<R>]) -> Result<Self> {
        FockDim::new(diag.len())?;
        Ok(OperatorMatrix {
            m: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
        })
    }

    /// Diagonal operator `Σ f(n)|n⟩⟨n|`.
    pub fn from_fn_diagonal(dim: FockDim, f: impl Fn(usize) -> C<R>) -> Self {
        let d: Vec<_> = (0..dim.get()).map(f).collect();
        Self::from_diagonal(&d).expect("dim validated")
    }

    pub fn dim(&self) -> FockDim {
        FockDim(self.m.nrows())
    }

    pub fn matrix(&self) -> &DMatrix<C<R>> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C<R>> {
        self.m
    }

    pub fn adjoint(&self) -> Self {
        OperatorMatrix {
            m: self.m.adjoint(),
        }
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        self.dim().check(rhs.dim())?;
        Ok(OperatorMatrix { m: &self.m * &rhs.m })
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.dim().check(rhs.dim())?;
        Ok(OperatorMatrix { m: &self.m + &rhs.m })
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.dim().check(rhs.dim())?;
        Ok(OperatorMatrix { m: &self.m - &rhs.m })
    }

    pub fn scale(&self, s: C<R>) -> Self {
        OperatorMatrix { m: &self.m * s }
    }

    pub fn commutator(&self, rhs: &Self) -> Result<Self> {
        self.dim().check(rhs.dim())?;
        Ok(OperatorMatrix {
            m: &self.m * &rhs.m - &rhs.m * &self.m,
        })
    }

    pub fn apply(&self, v: &DVector<C<R>>) -> Result<DVector<C<R>>> {
        if v.len() != self.m.nrows() {
            return Err(Error::DimensionMismatch {
                left: self.m.nrows(),
                right: v.len(),
            });
        }
        Ok(&self.m * v)
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn is_hermitian(&self, tol: R) -> bool {
        max_abs((&self.m - self.m.adjoint()).iter()) <= tol
    }

    pub fn is_diagonal(&self) -> bool {
        let d = self.m.nrows();
        (0..d).all(|j| (0..d).all(|i| i == j || self.m[(i, j)] == Complex::new(R::zero(), R::zero())))
    }

    /// Largest entry of `|U†U − I|`.
    pub fn unitarity_defect(&self) -> R {
        let d = self.m.nrows();
        max_abs((self.m.adjoint() * &self.m - DMatrix::<C<R>>::identity(d, d)).iter())
    }

    pub fn is_unitary(&self, tol: R) -> bool {
        self.unitarity_defect() <= tol
    }

    /// `|U†U − I|` restricted to the interior block.
    pub fn interior_unitarity_defect(&self) -> R {
        let k = self.dim().interior();
        let p = self.m.adjoint() * &self.m;
        let mut worst = R::zero();
        for j in 0..k {
            for i in 0..k {
                let target = if i == j { R::one() } else { R::zero() };
                worst = worst.max(cabs(p[(i, j)] - cr(target)));
            }
        }
        worst
    }

    pub fn diagonal(&self) -> Vec<C<R>> {
        self.m.diagonal().iter().cloned().collect()
    }
}
