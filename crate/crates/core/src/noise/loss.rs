use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockDim, OperatorMatrix, QuantumState};
use crate::scalar::{cr, Real};

/// Pure-loss channel `ρ ↦ Σ_k E_k ρ E_k†` with
/// `E_k = γ^{k/2} (1−γ)^{n̂/2} a^k / √k!` and `γ = 1 − e^{−χ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossChannel {
    chi: f64,
    gamma: f64,
    kmax: Option<usize>,
}

/// Weight the Kraus cutoff is allowed to drop.
const TAIL_TOL: f64 = 1e-8;
/// Target for the automatically chosen cutoff.
const AUTO_TAIL: f64 = 1e-10;

impl LossChannel {
    pub fn from_chi(chi: f64) -> Result<Self> {
        if !(chi >= 0.0) || !chi.is_finite() {
            return Err(Error::InvalidArgument(format!("loss exponent must be non-negative, got {chi}")));
        }
        Ok(LossChannel {
            chi,
            gamma: -(-chi).exp_m1(),
            kmax: None,
        })
    }

    pub fn from_gamma(gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!("loss probability must lie in [0, 1), got {gamma}")));
        }
        Ok(LossChannel {
            chi: -(-gamma).ln_1p(),
            gamma,
            kmax: None,
        })
    }

    /// Fixes the Kraus cutoff instead of choosing it from the input state.
    pub fn with_kmax(mut self, kmax: usize) -> Self {
        self.kmax = Some(kmax);
        self
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn kmax(&self) -> Option<usize> {
        self.kmax
    }

    /// `⟨n−k|E_k|n⟩ = √C(n,k) γ^{k/2} (1−γ)^{(n−k)/2}`, computed in log space.
    fn amplitude(&self, n: usize, k: usize) -> f64 {
        if k > n {
            return 0.0;
        }
        if self.gamma == 0.0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        let ln_binom = ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k);
        let ln = 0.5 * (ln_binom + k as f64 * self.gamma.ln() + (n - k) as f64 * (-self.gamma).ln_1p());
        ln.exp()
    }

    pub fn kraus<R: Real>(&self, k: usize, dim: FockDim) -> OperatorMatrix<R> {
        let d = dim.get();
        let mut m = DMatrix::zeros(d, d);
        for n in k..d {
            m[(n - k, n)] = cr(R::lit(self.amplitude(n, k)));
        }
        OperatorMatrix::new(m).expect("dim validated")
    }

    /// `⟨n|Σ_{k≤kmax} E_k†E_k|n⟩` for every level, i.e. the probability of
    /// at most `kmax` losses from `|n⟩`.
    pub fn completeness_diagonal(&self, kmax: usize, dim: FockDim) -> Vec<f64> {
        (0..dim.get())
            .map(|n| (0..=kmax.min(n)).map(|k| self.amplitude(n, k).powi(2)).sum())
            .collect()
    }

    /// Weight of `populations` that needs more than `kmax` Kraus terms.
    fn tail_weight(&self, kmax: usize, populations: &[f64]) -> f64 {
        populations
            .iter()
            .enumerate()
            .map(|(n, p)| {
                let kept: f64 = (0..=kmax.min(n)).map(|k| self.amplitude(n, k).powi(2)).sum();
                p * (1.0 - kept).max(0.0)
            })
            .sum()
    }

    fn cutoff_for(&self, populations: &[f64]) -> Result<usize> {
        let top = populations.len() - 1;
        match self.kmax {
            Some(k) => {
                let tail = self.tail_weight(k, populations);
                if tail > TAIL_TOL {
                    return Err(Error::KrausCutoff { kmax: k, tail });
                }
                Ok(k.min(top))
            }
            None => Ok((0..=top)
                .find(|&k| self.tail_weight(k, populations) < AUTO_TAIL)
                .unwrap_or(top)),
        }
    }
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Sends a state through the loss channel; the result is a density state.
pub fn apply_loss<R: Real>(state: &QuantumState<R>, channel: &LossChannel) -> Result<QuantumState<R>> {
    let d = state.dim().get();
    let pops: Vec<f64> = state.populations().iter().map(|p| p.to_f64_lossy()).collect();
    let kmax = channel.cutoff_for(&pops)?;
    let rho = state.density_matrix();
    let amps: Vec<Vec<R>> = (0..=kmax)
        .map(|k| (0..d).map(|n| R::lit(channel.amplitude(n, k))).collect())
        .collect();
    let mut out = DMatrix::zeros(d, d);
    for (k, e) in amps.iter().enumerate() {
        for j in k..d {
            for i in k..d {
                let w = e[i] * e[j];
                if w != R::zero() {
                    out[(i - k, j - k)] += rho[(i, j)] * w;
                }
            }
        }
    }
    Ok(QuantumState::density_unchecked(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::coherent_state;
    use crate::metrics::fidelity;
    use crate::scalar::C;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dim(d: usize) -> FockDim {
        FockDim::new(d).unwrap()
    }

    #[test]
    fn parameter_conversions() {
        let ch = LossChannel::from_chi(0.1).unwrap();
        assert_relative_eq!(ch.gamma(), 1.0 - (-0.1f64).exp(), epsilon = 1e-16);
        let back = LossChannel::from_gamma(ch.gamma()).unwrap();
        assert_relative_eq!(back.chi(), 0.1, epsilon = 1e-15);
        assert!(LossChannel::from_gamma(1.0).is_err());
        assert!(LossChannel::from_chi(-0.1).is_err());
    }

    #[test]
    fn zero_loss_is_identity() {
        let d = dim(20);
        let st = coherent_state::<f64>(C::new(1.5, 0.3), d).unwrap();
        let out = apply_loss(&st, &LossChannel::from_gamma(0.0).unwrap()).unwrap();
        let diff = out.density_matrix() - st.density_matrix();
        assert!(diff.iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn coherent_states_stay_coherent() {
        let d = dim(50);
        let g = 0.1;
        let st = coherent_state::<f64>(C::new(2.0, 0.0), d).unwrap();
        let out = apply_loss(&st, &LossChannel::from_gamma(g).unwrap()).unwrap();
        let want = coherent_state::<f64>(C::new(2.0 * (1.0f64 - g).sqrt(), 0.0), d).unwrap();
        assert!((fidelity(&out, &want).unwrap() - 1.0).abs() < 1e-7);
        assert_relative_eq!(out.mean_photon_number(), 4.0 * (1.0 - g), epsilon = 1e-6);
    }

    #[test]
    fn kraus_completeness_on_resolved_levels() {
        let d = dim(100);
        let interior = d.interior();
        for g in [0.01, 0.03] {
            let diag = LossChannel::from_gamma(g).unwrap().completeness_diagonal(20, d);
            assert!(diag[..interior].iter().all(|x| (x - 1.0).abs() < 1e-8));
        }
        // At γ = 0.1, twenty Kraus terms only resolve levels up to n = 52;
        // beyond that more than 20 losses have appreciable probability.
        let diag = LossChannel::from_gamma(0.1).unwrap().completeness_diagonal(20, d);
        assert!(diag[..=52].iter().all(|x| (x - 1.0).abs() < 1e-8));
        assert!((diag[94] - 1.0).abs() > 1e-4);

        // Dense check of Σ E_k†E_k for one case.
        let ch = LossChannel::from_gamma(0.03).unwrap();
        let mut acc = OperatorMatrix::<f64>::zeros(d);
        for k in 0..=20 {
            let e = ch.kraus::<f64>(k, d);
            acc = acc.add(&e.adjoint().mul(&e).unwrap()).unwrap();
        }
        for i in 0..interior {
            for j in 0..interior {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((acc.matrix()[(i, j)].re - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn explicit_cutoff_too_small_is_rejected() {
        let d = dim(60);
        let st = coherent_state::<f64>(C::new(4.0, 0.0), d).unwrap();
        let ch = LossChannel::from_gamma(0.3).unwrap().with_kmax(2);
        assert!(matches!(apply_loss(&st, &ch), Err(Error::KrausCutoff { kmax: 2, .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn semigroup_and_trace(g1 in 0.0f64..0.4, g2 in 0.0f64..0.4, re in -2.0f64..2.0, im in -2.0f64..2.0) {
            let d = dim(50);
            let st = coherent_state::<f64>(C::new(re, im), d).unwrap();
            let c1 = LossChannel::from_gamma(g1).unwrap();
            let c2 = LossChannel::from_gamma(g2).unwrap();
            let twice = apply_loss(&apply_loss(&st, &c1).unwrap(), &c2).unwrap();
            let once = apply_loss(&st, &LossChannel::from_gamma(1.0 - (1.0 - g1) * (1.0 - g2)).unwrap()).unwrap();
            prop_assert!((twice.trace() - 1.0).abs() < 1e-8);
            prop_assert!((fidelity(&twice, &once).unwrap() - 1.0).abs() < 1e-8);
            prop_assert!((once.mean_photon_number() - (1.0 - g1) * (1.0 - g2) * st.mean_photon_number()).abs() < 1e-6);
        }
    }
}
