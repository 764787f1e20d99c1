use nalgebra::DVector;

use super::{FockDim, QuantumState};
use crate::scalar::{norm_sqr, Real};

/// Hermite functions `ψ_n(q) = ⟨n|q⟩` for `n < dim`.
///
/// Uses the normalized three-term recursion with a running power-of-ten
/// rescale, so the `e^{−q²/2}` prefactor never has to be formed on its own
/// and far-out grid points keep their leading digits. The result is the
/// truncated, delta-normalized eigenvector of Q and is not ℓ²-normalized.
pub fn position_eigenvector<R: Real>(q: R, dim: FockDim) -> DVector<R> {
    let q = q.to_f64_lossy();
    let d = dim.get();
    let mut out = vec![0.0f64; d];
    const RESCALE: f64 = 1e150;
    let ln_rescale = RESCALE.ln();

    // Track ψ_n = v_n · exp(log_scale).
    let mut log_scale = -0.5 * q * q - 0.25 * std::f64::consts::PI.ln();
    let mut prev = 0.0f64;
    let mut cur = 1.0f64;
    for (n, slot) in out.iter_mut().enumerate() {
        *slot = cur * log_scale.exp();
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * q * cur - (nf / (nf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            log_scale += ln_rescale;
        }
    }
    DVector::from_iterator(d, out.into_iter().map(R::lit))
}

/// Position probability density `⟨q|ρ|q⟩` of the truncated state.
pub fn position_density<R: Real>(state: &QuantumState<R>, q: R) -> R {
    let v = position_eigenvector::<R>(q, state.dim()).map(crate::scalar::cr);
    match state.as_pure() {
        Some(psi) => norm_sqr(v.dotc(psi)),
        None => {
            let rho = state.as_density().expect("density");
            v.dotc(&(rho * &v)).re
        }
    }
}
