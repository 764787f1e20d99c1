use rayon::prelude::*;

use super::QuantumState;
use crate::scalar::{Real, C};

/// Wigner function `W(x, p)` at each grid point, normalized so that the
/// vacuum peaks at 1/π.
///
/// Evaluates `Σ ρ_mn W_mn(x, p)` with the Laguerre-function recursion for
/// the Fock-basis kernels, which costs O(dim²) per point and stays stable
/// for dims in the hundreds.
pub fn wigner<R: Real>(state: &QuantumState<R>, grid: &[(R, R)]) -> Vec<R> {
    let rho = state.density_matrix().map(|z| C::new(z.re.to_f64_lossy(), z.im.to_f64_lossy()));
    let d = rho.nrows();
    let sqrt: Vec<f64> = (0..=d).map(|n| (n as f64).sqrt()).collect();
    grid.par_iter()
        .map(|&(x, p)| {
            let a = C::new(x.to_f64_lossy(), p.to_f64_lossy()) / std::f64::consts::SQRT_2;
            let mut w = vec![C::new(0.0, 0.0); d];
            w[0] = C::new((-2.0 * a.norm_sqr()).exp() / std::f64::consts::PI, 0.0);
            let mut acc = rho[(0, 0)].re * w[0].re;
            for n in 1..d {
                w[n] = a * w[n - 1] * 2.0 / sqrt[n];
                acc += 2.0 * (rho[(0, n)] * w[n]).re;
            }
            for m in 1..d {
                let mut temp = w[m];
                w[m] = (a.conj() * temp * 2.0 - w[m - 1] * sqrt[m]) / sqrt[m];
                acc += (rho[(m, m)] * w[m]).re;
                for n in m + 1..d {
                    let next = (a * w[n - 1] * 2.0 - temp * sqrt[m]) / sqrt[n];
                    temp = w[n];
                    w[n] = next;
                    acc += 2.0 * (rho[(m, n)] * w[n]).re;
                }
            }
            R::lit(acc)
        })
        .collect()
}
