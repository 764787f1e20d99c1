use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{FockDim, OperatorMatrix};
use crate::error::{Error, Result};
use crate::scalar::{cabs, cexp, cr, max_abs, Real, C};

/// Eigendecomposition `H = V diag(λ) V†` of a Hermitian operator, kept
/// around so functions of `H` at many different scales reuse one
/// factorization.
#[derive(Clone, Debug)]
pub struct HermitianSpectrum<R: Real> {
    values: DVector<R>,
    vectors: DMatrix<C<R>>,
}

impl<R: Real> HermitianSpectrum<R> {
    pub fn new(h: &OperatorMatrix<R>) -> Result<Self> {
        if !h.is_finite() {
            return Err(Error::Numeric("Hermitian operator"));
        }
        let m = h.matrix();
        let scale = max_abs(m.iter()).max(R::one());
        if !h.is_hermitian(scale * R::lit(R::UNITARY_TOL)) {
            return Err(Error::InvalidArgument("operator is not Hermitian".into()));
        }
        let sym = (m + m.adjoint()) * cr(R::lit(0.5));
        let eig = SymmetricEigen::new(sym);
        Ok(HermitianSpectrum {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
        })
    }

    pub fn dim(&self) -> FockDim {
        FockDim::new(self.values.len()).expect("spectrum of a valid operator")
    }

    pub fn values(&self) -> &DVector<R> {
        &self.values
    }

    /// Eigenvectors as columns.
    pub fn vectors(&self) -> &DMatrix<C<R>> {
        &self.vectors
    }

    /// `f(H) = V diag(f(λ)) V†`.
    pub fn apply_fn(&self, f: impl Fn(R) -> C<R>) -> OperatorMatrix<R> {
        let mut scaled = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            let fl = f(l);
            for z in scaled.column_mut(j).iter_mut() {
                *z *= fl;
            }
        }
        OperatorMatrix::from_matrix_unchecked(scaled * self.vectors.adjoint())
    }

    /// `exp(scale · H)`.
    pub fn exp(&self, scale: C<R>) -> OperatorMatrix<R> {
        self.apply_fn(|l| cexp(scale * cr(l)))
    }
}

/// `exp(scale · H)`.
///
/// Diagonal inputs are exponentiated entrywise, Hermitian and anti-Hermitian
/// inputs go through an eigendecomposition, and anything else falls back to
/// scaling and squaring of a Taylor polynomial.
pub fn matrix_exp<R: Real>(h: &OperatorMatrix<R>, scale: C<R>) -> Result<OperatorMatrix<R>> {
    if !h.is_finite() || !scale.re.is_finite() || !scale.im.is_finite() {
        return Err(Error::Numeric("matrix exponential input"));
    }
    if h.is_diagonal() {
        let d: Vec<_> = h.diagonal().into_iter().map(|z| cexp(z * scale)).collect();
        return OperatorMatrix::from_diagonal(&d);
    }
    let m = h.matrix();
    let tol = max_abs(m.iter()).max(R::one()) * R::lit(1e-13);
    if max_abs((m - m.adjoint()).iter()) <= tol {
        return Ok(HermitianSpectrum::new(h)?.exp(scale));
    }
    if max_abs((m + m.adjoint()).iter()) <= tol {
        // H = −iK with K Hermitian.
        let k = OperatorMatrix::from_matrix_unchecked(m * C::new(R::zero(), R::one()));
        return Ok(HermitianSpectrum::new(&k)?.exp(scale * C::new(R::zero(), -R::one())));
    }
    Ok(OperatorMatrix::from_matrix_unchecked(taylor_exp(&(m * scale))))
}

fn taylor_exp<R: Real>(a: &DMatrix<C<R>>) -> DMatrix<C<R>> {
    let d = a.nrows();
    let norm = a
        .column_iter()
        .map(|col| col.iter().fold(R::zero(), |s, z| s + cabs(*z)))
        .fold(R::zero(), |x, y| x.max(y));
    let mut squarings = 0u32;
    let mut s = R::one();
    let half = R::lit(0.5);
    while norm * s > half {
        s *= half;
        squarings += 1;
    }
    let a = a * cr(s);
    let mut term = DMatrix::<C<R>>::identity(d, d);
    let mut sum = term.clone();
    for k in 1..=24 {
        term = &term * &a * cr(R::one() / R::from_usize(k).unwrap());
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}
