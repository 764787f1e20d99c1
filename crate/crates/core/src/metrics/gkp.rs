use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{fidelity, Estimator, MAX_ENUMERATED_ROUNDS};
use crate::error::{Error, Result};
use crate::fock::QuantumState;
use crate::noise::HardwareParams;
use crate::qpe::{gkp_reference, GkpDetector, GkpOutcome, GkpTrajectory};
use crate::rng::par_streams;
use crate::scalar::Real;

/// Probability and fidelity of one `(ϑ_x, ϑ_p)` outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GkpOutcomeStats {
    pub index_x: u64,
    pub index_p: u64,
    pub delta_x: f64,
    pub delta_p: f64,
    pub probability: f64,
    /// Mean fidelity of the conditional states that produced this outcome.
    pub fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GkpFidelityReport {
    pub rounds: usize,
    pub average: f64,
    pub std_error: f64,
    pub samples: Option<u64>,
    pub noisy: bool,
    pub per_outcome: Vec<GkpOutcomeStats>,
}

/// Probability-weighted fidelity between each conditional state and the
/// displaced reference `D[(δ(x) + iδ(p))√(π/2)] ρ_ideal D†`.
///
/// With `noise = Some(params)` every cell runs under the hardware model and
/// the coupling comes from `params`; otherwise `g` is used.
pub fn gkp_detection_fidelity<R: Real>(
    state: &QuantumState<R>,
    ideal: &QuantumState<R>,
    rounds: usize,
    g: f64,
    noise: Option<&HardwareParams>,
    estimator: Estimator,
) -> Result<GkpFidelityReport> {
    state.dim().check(ideal.dim())?;
    let detector = match noise {
        Some(params) => GkpDetector::with_noise(rounds, state.dim(), params)?,
        None => GkpDetector::new(rounds, g, state.dim())?,
    };
    let cache: Mutex<HashMap<(u64, u64), QuantumState<R>>> = Mutex::new(HashMap::new());
    let score = |t: &GkpTrajectory<R>| -> Result<f64> {
        let key = t.outcome.indices();
        let cached = cache.lock().expect("cache lock").get(&key).cloned();
        let reference = match cached {
            Some(r) => r,
            None => {
                let r = gkp_reference(ideal, &t.outcome)?;
                cache.lock().expect("cache lock").insert(key, r.clone());
                r
            }
        };
        Ok(fidelity(&t.state, &reference)?.to_f64_lossy().min(1.0))
    };

    let mut table: HashMap<(u64, u64), (GkpOutcome, f64, f64)> = HashMap::new();
    let mut add = |o: GkpOutcome, p: f64, f: f64| {
        let e = table.entry(o.indices()).or_insert((o, 0.0, 0.0));
        e.1 += p;
        e.2 += p * f;
    };
    let (average, std_error, samples) = match estimator {
        Estimator::Exact => {
            // Two registers of `rounds` bits each.
            if 2 * rounds > MAX_ENUMERATED_ROUNDS {
                return Err(Error::EnumerationCost { rounds: 2 * rounds });
            }
            let rows = detector.map_branches(state, |t| Ok((t.probability.to_f64_lossy(), score(&t)?, t.outcome)))?;
            let mut avg = 0.0;
            for (p, f, o) in rows {
                avg += p * f;
                add(o, p, f);
            }
            (avg, 0.0, None)
        }
        Estimator::Sampled { samples, seed, workers } => {
            if samples == 0 {
                return Err(Error::InvalidArgument("sampling needs at least one trajectory".into()));
            }
            let rows = par_streams(seed, samples, workers, |_, rng| -> Result<(f64, GkpOutcome)> {
                let t = detector.run(state, rng)?;
                Ok((score(&t)?, t.outcome))
            });
            let w = 1.0 / samples as f64;
            let mut values = Vec::with_capacity(samples as usize);
            for r in rows {
                let (f, o) = r?;
                add(o, w, f);
                values.push(f);
            }
            let mean = values.iter().sum::<f64>() * w;
            let var = if samples > 1 {
                values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples - 1) as f64
            } else {
                0.0
            };
            (mean, (var / samples as f64).sqrt(), Some(samples))
        }
    };
    let mut per_outcome: Vec<GkpOutcomeStats> = table
        .into_values()
        .map(|(o, p, pf)| {
            let (index_x, index_p) = o.indices();
            GkpOutcomeStats {
                index_x,
                index_p,
                delta_x: o.delta_x,
                delta_p: o.delta_p,
                probability: p,
                fidelity: if p > 0.0 { pf / p } else { 0.0 },
            }
        })
        .collect();
    per_outcome.sort_by_key(|s| (s.index_x, s.index_p));
    Ok(GkpFidelityReport { rounds, average, std_error, samples, noisy: noise.is_some(), per_outcome })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{gkp_state, GkpSpec};
    use crate::fock::FockDim;
    use approx::assert_relative_eq;

    #[test]
    fn exact_and_sampled_agree() {
        let d = FockDim::new(80).unwrap();
        let psi = gkp_state::<f64>(&GkpSpec::new(0.4, 0, d).unwrap()).unwrap();
        let exact = gkp_detection_fidelity(&psi, &psi, 2, 1.0, None, Estimator::Exact).unwrap();
        let total: f64 = exact.per_outcome.iter().map(|s| s.probability).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-9);
        assert!(exact.average > 0.0 && exact.average <= 1.0);
        let est = gkp_detection_fidelity(&psi, &psi, 2, 1.0, None, Estimator::Sampled { samples: 2000, seed: 4, workers: 0 })
            .unwrap();
        assert!((est.average - exact.average).abs() < 4.0 * est.std_error + 1e-9);
    }

    #[test]
    fn sharp_state_keeps_high_fidelity() {
        let d = FockDim::new(200).unwrap();
        let psi = gkp_state::<f64>(&GkpSpec::new(0.25, 0, d).unwrap()).unwrap();
        let r = gkp_detection_fidelity(&psi, &psi, 1, 1.0, None, Estimator::Exact).unwrap();
        let zero = r.per_outcome.iter().find(|s| s.index_x == 0 && s.index_p == 0).unwrap();
        assert!(zero.fidelity > 0.95, "{}", zero.fidelity);
    }
}
