use nalgebra::DMatrix;

use super::{FockDim, HermitianSpectrum, OperatorMatrix};
use crate::error::Result;
use crate::scalar::{c, cis, cr, Real, C};

pub fn annihilation<R: Real>(dim: FockDim) -> OperatorMatrix<R> {
    let d = dim.get();
    let mut m = DMatrix::zeros(d, d);
    for n in 1..d {
        m[(n - 1, n)] = cr(R::from_usize(n).unwrap().sqrt());
    }
    OperatorMatrix::from_matrix_unchecked(m)
}

/// `(a, a†)` with `a[n−1, n] = √n`.
pub fn ladder_operators<R: Real>(dim: usize) -> Result<(OperatorMatrix<R>, OperatorMatrix<R>)> {
    let dim = FockDim::new(dim)?;
    let a = annihilation(dim);
    let ad = a.adjoint();
    Ok((a, ad))
}

pub fn number_operator<R: Real>(dim: FockDim) -> OperatorMatrix<R> {
    OperatorMatrix::from_fn_diagonal(dim, |n| cr(R::from_usize(n).unwrap()))
}

/// `X_θ = (a e^{−iθ} + a† e^{iθ})/√2`; θ = 0 gives Q and θ = π/2 gives P.
pub fn quadrature<R: Real>(theta: R, dim: FockDim) -> OperatorMatrix<R> {
    let a = annihilation::<R>(dim).into_matrix();
    let ph = cis(theta);
    let m = (&a * ph.conj() + a.adjoint() * ph) * cr(R::lit(std::f64::consts::FRAC_1_SQRT_2));
    OperatorMatrix::from_matrix_unchecked(m)
}

pub fn position<R: Real>(dim: FockDim) -> OperatorMatrix<R> {
    quadrature(R::zero(), dim)
}

pub fn momentum<R: Real>(dim: FockDim) -> OperatorMatrix<R> {
    quadrature(R::frac_pi_2(), dim)
}

/// `D(α) = exp(α a† − α* a)`, exactly the identity at α = 0.
pub fn displacement<R: Real>(alpha: C<R>, dim: FockDim) -> Result<OperatorMatrix<R>> {
    if alpha.re == R::zero() && alpha.im == R::zero() {
        return Ok(OperatorMatrix::identity(dim));
    }
    // exp(G) with G anti-Hermitian is exp(−iH) for the Hermitian H = iG.
    let a = annihilation::<R>(dim).into_matrix();
    let g = a.adjoint() * alpha - &a * alpha.conj();
    let h = OperatorMatrix::from_matrix_unchecked(g * c::<R>(0.0, 1.0));
    HermitianSpectrum::new(&h).map(|s| s.exp(c(0.0, -1.0)))
}

/// `S(ζ) = exp((ζ* a² − ζ a†²)/2)`.
pub fn squeeze<R: Real>(zeta: C<R>, dim: FockDim) -> Result<OperatorMatrix<R>> {
    if zeta.re == R::zero() && zeta.im == R::zero() {
        return Ok(OperatorMatrix::identity(dim));
    }
    let a = annihilation::<R>(dim).into_matrix();
    let a2 = &a * &a;
    let g = (&a2 * zeta.conj() - a2.adjoint() * zeta) * cr(R::lit(0.5));
    let h = OperatorMatrix::from_matrix_unchecked(g * c::<R>(0.0, 1.0));
    HermitianSpectrum::new(&h).map(|s| s.exp(c(0.0, -1.0)))
}

/// `e^{iθ n̂}`.
pub fn rotation<R: Real>(theta: R, dim: FockDim) -> OperatorMatrix<R> {
    OperatorMatrix::from_fn_diagonal(dim, |n| cis(theta * R::from_usize(n).unwrap()))
}

pub fn parity<R: Real>(dim: FockDim) -> OperatorMatrix<R> {
    OperatorMatrix::from_fn_diagonal(dim, |n| cr(if n % 2 == 0 { R::one() } else { -R::one() }))
}

/// Projector `Π_N^l` onto Fock levels `n ≡ l (mod N)`.
pub fn residue_projector<R: Real>(modulus: usize, l: usize, dim: FockDim) -> OperatorMatrix<R> {
    OperatorMatrix::from_fn_diagonal(dim, |n| {
        cr(if n % modulus == l % modulus {
            R::one()
        } else {
            R::zero()
        })
    })
}

/// Finite-energy envelope `e^{−Δ² n̂}`.
pub fn envelope<R: Real>(delta: R, dim: FockDim) -> OperatorMatrix<R> {
    let d2 = delta * delta;
    OperatorMatrix::from_fn_diagonal(dim, |n| cr((-d2 * R::from_usize(n).unwrap()).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::QuantumState;
    use approx::assert_relative_eq;

    fn dim(d: usize) -> FockDim {
        FockDim::new(d).unwrap()
    }

    #[test]
    fn ladder_entries() {
        assert!(ladder_operators::<f64>(1).is_err());
        let (a, _) = ladder_operators::<f64>(2).unwrap();
        let nz: Vec<_> = a.matrix().iter().filter(|z| z.norm() > 0.0).collect();
        assert_eq!(nz.len(), 1);
        assert_eq!(a.matrix()[(0, 1)].re, 1.0);
        let (a, ad) = ladder_operators::<f64>(4).unwrap();
        assert_relative_eq!(a.matrix()[(2, 3)].re, 1.7320508, epsilon = 1e-7);
        let n = ad.mul(&a).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { i as f64 } else { 0.0 };
                assert_relative_eq!(n.matrix()[(i, j)].re, want, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn canonical_commutators_hold_off_the_edge() {
        let d = dim(30);
        let (a, ad) = ladder_operators::<f64>(30).unwrap();
        let comm = a.commutator(&ad).unwrap();
        for i in 0..29 {
            for j in 0..29 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((comm.matrix()[(i, j)] - C::new(want, 0.0)).norm() < 1e-13);
            }
        }
        // The truncation artifact lives in the last diagonal entry.
        assert!((comm.matrix()[(29, 29)].re + 29.0).abs() < 1e-12);

        let qp = position::<f64>(d).commutator(&momentum(d)).unwrap();
        let k = d.interior();
        for i in 0..k {
            for j in 0..k {
                let want = if i == j { C::new(0.0, 1.0) } else { C::new(0.0, 0.0) };
                assert!((qp.matrix()[(i, j)] - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn displacement_identities() {
        let d = dim(60);
        let d0 = displacement::<f64>(C::new(0.0, 0.0), d).unwrap();
        assert_eq!(d0, OperatorMatrix::identity(d));

        let d1 = displacement::<f64>(C::new(1.0, 0.0), d).unwrap();
        assert_relative_eq!(d1.matrix()[(0, 0)].re, 0.6065307, epsilon = 1e-7);

        let plus = displacement::<f64>(C::new(0.5, 0.0), d).unwrap();
        let minus = displacement::<f64>(C::new(-0.5, 0.0), d).unwrap();
        let prod = plus.mul(&minus).unwrap();
        assert!(prod.sub(&OperatorMatrix::identity(d)).unwrap().matrix().iter().all(|z| z.norm() < 1e-8));
        assert!(plus.is_unitary(1e-9));
    }

    #[test]
    fn displaced_vacuum_is_coherent() {
        let d = dim(40);
        let alpha: C<f64> = C::new(1.2, -0.7);
        let v = QuantumState::vacuum(d).transform(&displacement(alpha, d).unwrap()).unwrap();
        let psi = v.as_pure().unwrap();
        let mut fact = 1.0f64;
        for n in 0..12 {
            if n > 0 {
                fact *= n as f64;
            }
            let want = (-alpha.norm_sqr() / 2.0).exp() * alpha.powu(n as u32) / fact.sqrt();
            assert!((psi[n] - want).norm() < 1e-10, "n={n}");
        }
    }

    #[test]
    fn squeezing_reduces_position_variance_for_positive_r() {
        let d = dim(80);
        let s = squeeze::<f64>(C::new(0.4, 0.0), d).unwrap();
        let st = QuantumState::vacuum(d).transform(&s).unwrap();
        let q = position::<f64>(d);
        let q2 = q.mul(&q).unwrap();
        let var = st.expectation(&q2).unwrap().re;
        assert_relative_eq!(var, (-0.8f64).exp() / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn residue_projectors_resolve_identity() {
        let d = dim(17);
        let mut acc = OperatorMatrix::<f64>::zeros(d);
        for l in 0..5 {
            acc = acc.add(&residue_projector(5, l, d)).unwrap();
        }
        assert_eq!(acc, OperatorMatrix::identity(d));
    }
}
