use serde::{Deserialize, Serialize};

use super::engine::QpeEngine;
use super::schedule::{QpeSchedule, ScheduleKind};
use super::{deduce_rotation_error, fejer_kernel};
use crate::error::{Error, Result};
use crate::fock::QuantumState;
use crate::rng::par_streams;
use crate::scalar::Real;

/// Probabilities over the dyadic outcomes `ϑ = j/2^m`, indexed by `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    rounds: usize,
    probabilities: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn new(rounds: usize, probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.len() as u64 != 1u64 << rounds {
            return Err(Error::DimensionMismatch { left: probabilities.len(), right: 1 << rounds });
        }
        Ok(OutcomeDistribution { rounds, probabilities })
    }

    /// Empirical distribution from outcome counts.
    pub fn from_counts(rounds: usize, counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidArgument("no samples".into()));
        }
        Self::new(rounds, counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, j: u64) -> f64 {
        self.probabilities[j as usize]
    }

    pub fn theta(&self, j: u64) -> f64 {
        j as f64 / (1u64 << self.rounds) as f64
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    /// `(ϑ, p)` pairs in outcome order.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.probabilities.iter().enumerate().map(|(j, &p)| (self.theta(j as u64), p))
    }

    /// Outcome with the largest probability; ties go to the smallest index.
    pub fn peak(&self) -> u64 {
        let mut best = 0;
        for (j, &p) in self.probabilities.iter().enumerate() {
            if p > self.probabilities[best] {
                best = j;
            }
        }
        best as u64
    }

    pub fn total_variation(&self, other: &OutcomeDistribution) -> Result<f64> {
        if self.rounds != other.rounds {
            return Err(Error::DimensionMismatch { left: self.rounds, right: other.rounds });
        }
        Ok(0.5 * self.probabilities.iter().zip(&other.probabilities).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }

    /// Mass of each bin `r_{N,l}`, indexed by `l`.
    pub fn bin_masses(&self, modulus: u64) -> Vec<f64> {
        let mut out = vec![0.0; modulus as usize];
        for (theta, p) in self.iter() {
            out[deduce_rotation_error(theta, modulus).0 as usize] += p;
        }
        out
    }
}

/// `Tr(ρ Π_N^l)` for each residue `l`.
pub fn residue_weights<R: Real>(state: &QuantumState<R>, modulus: u64) -> Vec<f64> {
    let mut w = vec![0.0; modulus as usize];
    for (n, p) in state.populations().into_iter().enumerate() {
        w[n % modulus as usize] += p.to_f64_lossy();
    }
    w
}

/// `p(ϑ) = Σ_l Tr(ρ Π_N^l) F_{2^m}(ϑ − l/N)` for a rotation schedule.
pub fn outcome_distribution<R: Real>(state: &QuantumState<R>, schedule: &QpeSchedule) -> Result<OutcomeDistribution> {
    let ScheduleKind::Rotation { modulus, .. } = schedule.kind() else {
        return Err(Error::InvalidArgument("analytic distribution needs a rotation schedule".into()));
    };
    let weights = residue_weights(state, modulus);
    let points: Vec<(f64, f64)> =
        weights.iter().enumerate().map(|(l, &w)| (l as f64 / modulus as f64, w)).collect();
    Ok(kernel_mixture(schedule.rounds(), &points))
}

/// `Σ_k w_k F_{2^m}(ϑ − x_k)` over the dyadic grid for weighted eigenphases.
pub fn kernel_mixture(rounds: usize, points: &[(f64, f64)]) -> OutcomeDistribution {
    let n = 1u64 << rounds;
    let probabilities = (0..n)
        .map(|j| {
            let theta = j as f64 / n as f64;
            points.iter().map(|&(x, w)| w * fejer_kernel::<f64>(n, theta - x)).sum()
        })
        .collect();
    OutcomeDistribution { rounds, probabilities }
}

impl<R: Real> QpeEngine<R> {
    /// Outcome distribution from the populations of the coupling eigenbasis.
    pub fn analytic_distribution(&self, state: &QuantumState<R>) -> Result<OutcomeDistribution> {
        let pops = self.eigen_populations(state)?;
        let points: Vec<(f64, f64)> = self
            .coupling()
            .eigen_ratios()
            .into_iter()
            .zip(pops)
            .map(|(x, p)| (x, p.to_f64_lossy()))
            .collect();
        Ok(kernel_mixture(self.schedule().rounds(), &points))
    }

    /// Outcome counts of `samples` trajectories; trajectory `k` uses stream
    /// `(seed, k)`, so the counts do not depend on `workers`.
    pub fn sample_counts(&self, state: &QuantumState<R>, samples: u64, seed: u64, workers: usize) -> Result<Vec<u64>> {
        let pops = self.eigen_populations(state)?;
        let outcomes = par_streams(seed, samples, workers, |_, rng| {
            super::schedule::outcome_index(&self.sample_outcome(&pops, rng))
        });
        let mut counts = vec![0u64; self.schedule().outcomes() as usize];
        for j in outcomes {
            counts[j as usize] += 1;
        }
        Ok(counts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{code_plus_state, RotationCodeSpec};
    use crate::fock::FockDim;
    use crate::noise::{apply_loss, LossChannel};
    use crate::qpe::Axis;
    use approx::assert_relative_eq;

    fn dim(n: usize) -> FockDim {
        FockDim::new(n).unwrap()
    }

    fn lossy_cat(n: usize, alpha: f64, chi: f64, d: usize) -> QuantumState<f64> {
        let plus = code_plus_state::<f64>(&RotationCodeSpec::cat(n, alpha, 0, dim(d)).unwrap()).unwrap();
        apply_loss(&plus, &LossChannel::from_chi(chi).unwrap()).unwrap()
    }

    #[test]
    fn code_state_single_peak() {
        let d = dim(60);
        let psi = crate::codes::cat_state::<f64>(&RotationCodeSpec::cat(4, 3.0, 0, d).unwrap()).unwrap();
        for m in 2..6 {
            let p = outcome_distribution(&psi, &QpeSchedule::rotation(m, 4, 1.0).unwrap()).unwrap();
            assert_relative_eq!(p.probability(0), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn uniform_fock_mixture() {
        let d = dim(4);
        let parts: Vec<QuantumState<f64>> = (0..4).map(|n| QuantumState::fock(n, d).unwrap()).collect();
        let refs: Vec<(f64, &QuantumState<f64>)> = parts.iter().map(|s| (0.25, s)).collect();
        let mix = QuantumState::mixture(&refs).unwrap();
        let p = outcome_distribution(&mix, &QpeSchedule::rotation(2, 4, 1.0).unwrap()).unwrap();
        for j in 0..4 {
            assert_relative_eq!(p.probability(j), 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn matches_enumeration_on_lossy_cats() {
        for n in [3usize, 4, 5] {
            let rho = lossy_cat(n, 2.5, 0.15, 45);
            for m in 2..=5 {
                let s = QpeSchedule::rotation(m, n as u64, 1.0).unwrap();
                let exact = QpeEngine::new(s, rho.dim()).unwrap().branch_probabilities(&rho).unwrap();
                let analytic = outcome_distribution(&rho, &s).unwrap();
                assert_relative_eq!(analytic.total(), 1.0, epsilon = 1e-10);
                for (j, p) in exact.iter().enumerate() {
                    assert!((p - analytic.probability(j as u64)).abs() < 1e-9, "N={n} m={m} j={j}");
                }
            }
        }
    }

    #[test]
    fn five_peaks_after_loss() {
        let rho = lossy_cat(5, 5.0, -(1.0f64 - 0.03).ln(), 100);
        let s = QpeSchedule::rotation(8, 5, 1.0).unwrap();
        let p = outcome_distribution(&rho, &s).unwrap();
        let weights = residue_weights(&rho, 5);
        let masses = p.bin_masses(5);
        // Each bin carries its residue weight up to kernel leakage
        for l in 0..5 {
            assert!((masses[l] - weights[l]).abs() < 0.01, "l={l}");
        }
        // and its local maximum sits next to l/5.
        for l in 1..5 {
            let centre = (l as f64 / 5.0 * 256.0).round() as u64;
            let local = (centre - 2..=centre + 2).max_by(|a, b| p.probability(*a).total_cmp(&p.probability(*b))).unwrap();
            assert!((local as f64 / 256.0 - l as f64 / 5.0).abs() < 1.0 / 256.0);
        }
    }

    #[test]
    fn sampling_soundness() {
        let rho = lossy_cat(3, 2.5, 0.15, 45);
        let s = QpeSchedule::rotation(4, 3, 1.0).unwrap();
        let engine = QpeEngine::new(s, rho.dim()).unwrap();
        let counts = engine.sample_counts(&rho, 10_000, 42, 0).unwrap();
        let empirical = OutcomeDistribution::from_counts(4, &counts).unwrap();
        let tv = empirical.total_variation(&outcome_distribution(&rho, &s).unwrap()).unwrap();
        assert!(tv < 0.03, "TV = {tv}");
        assert_eq!(counts, engine.sample_counts(&rho, 10_000, 42, 3).unwrap());
    }

    #[test]
    fn quadrature_analytic_matches_enumeration() {
        let psi = crate::codes::coherent_state::<f64>(crate::scalar::c(0.8, -0.3), dim(30)).unwrap();
        let engine = QpeEngine::new(QpeSchedule::quadrature(4, Axis::P, 1.0).unwrap(), dim(30)).unwrap();
        let exact = engine.branch_probabilities(&psi).unwrap();
        let analytic = engine.analytic_distribution(&psi).unwrap();
        for (j, p) in exact.iter().enumerate() {
            assert!((p - analytic.probability(j as u64)).abs() < 1e-9);
        }
    }
}
