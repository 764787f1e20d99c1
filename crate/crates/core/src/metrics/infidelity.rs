use serde::{Deserialize, Serialize};

use super::{fidelity, reference_error_state};
use crate::error::{Error, Result};
use crate::fock::QuantumState;
use crate::noise::{HardwareParams, LindbladModel};
use crate::qpe::{deduce_rotation_error, NoisyEngine, QpeEngine, QpeSchedule, ScheduleKind, Trajectory};
use crate::rng::par_streams;
use crate::scalar::Real;

/// Exhaustive enumeration is refused beyond this many rounds.
pub const MAX_ENUMERATED_ROUNDS: usize = 12;

/// How an ensemble average over trajectories is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Estimator {
    /// Every reachable trajectory, weighted by its probability.
    Exact,
    /// Monte Carlo over `samples` trajectories; trajectory `k` uses stream
    /// `(seed, k)`.
    Sampled { samples: u64, seed: u64, workers: usize },
}

/// Probability and mean infidelity of one bin `r_{N,l}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub l: u64,
    /// Number of lost excitations the bin reports, `(N − l) mod N`.
    pub lost: u64,
    pub probability: f64,
    pub mean_infidelity: f64,
}

/// `δ(m, N) = Σ_l Σ_{ϑ∈r_{N,l}} p_ϑ [1 − F(ρ_ϑ, ρ_l)]` with its per-bin
/// breakdown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfidelityReport {
    pub modulus: u64,
    pub rounds: usize,
    /// `Σ t_i` in μs.
    pub t_tot: f64,
    pub total: f64,
    /// Zero for exact evaluation.
    pub std_error: f64,
    pub samples: Option<u64>,
    pub noisy: bool,
    pub per_bin: Vec<BinStats>,
}

impl InfidelityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    /// One row per bin: `l,lost,probability,mean_infidelity`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("l,lost,probability,mean_infidelity\n");
        for b in &self.per_bin {
            out += &format!("{},{},{:.16e},{:.16e}\n", b.l, b.lost, b.probability, b.mean_infidelity);
        }
        out
    }
}

/// Noiseless `δ(m, N)` from the exact trajectory ensemble, timed with the
/// default dispersive coupling.
pub fn deduction_infidelity<R: Real>(rho_in: &QuantumState<R>, modulus: u64, rounds: usize) -> Result<InfidelityReport> {
    if rounds > MAX_ENUMERATED_ROUNDS {
        return Err(Error::EnumerationCost { rounds });
    }
    let schedule = QpeSchedule::rotation(rounds, modulus, HardwareParams::default().chi())?;
    rotation_infidelity(rho_in, &schedule, None, Estimator::Exact)
}

/// `δ(m, N)` with every window integrated under the Lindblad model.
pub fn total_infidelity_noisy<R: Real>(
    rho_in: &QuantumState<R>,
    schedule: &QpeSchedule,
    model: &LindbladModel<R>,
    estimator: Estimator,
) -> Result<InfidelityReport> {
    rotation_infidelity(rho_in, schedule, Some(model), estimator)
}

/// `δ(m, N)` for a rotation schedule, ideal or noisy.
pub fn rotation_infidelity<R: Real>(
    rho_in: &QuantumState<R>,
    schedule: &QpeSchedule,
    model: Option<&LindbladModel<R>>,
    estimator: Estimator,
) -> Result<InfidelityReport> {
    let ScheduleKind::Rotation { modulus, .. } = schedule.kind() else {
        return Err(Error::InvalidArgument("infidelity reports need a rotation schedule".into()));
    };
    let m = schedule.rounds();
    let references: Vec<Option<QuantumState<R>>> = (0..modulus as usize)
        .map(|l| match reference_error_state(rho_in, modulus as usize, l) {
            Ok(s) => Ok(Some(s)),
            Err(Error::UndefinedReference { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    // (bin, infidelity) for one trajectory; an empty reference subspace
    // counts as a complete failure.
    let score = |t: Trajectory<R>| -> Result<(usize, f64)> {
        let (l, _) = deduce_rotation_error(t.theta, modulus);
        let f = match &references[l as usize] {
            Some(r) => fidelity(&t.state, r)?.to_f64_lossy().min(1.0),
            None => 0.0,
        };
        Ok((l as usize, 1.0 - f))
    };
    let ideal = QpeEngine::new(*schedule, rho_in.dim())?;
    let noisy = model.map(|mdl| NoisyEngine::new(*schedule, mdl.clone())).transpose()?;

    let mut mass = vec![0.0; modulus as usize];
    let mut loss = vec![0.0; modulus as usize];
    let (total, std_error, samples) = match estimator {
        Estimator::Exact => {
            if m > MAX_ENUMERATED_ROUNDS {
                return Err(Error::EnumerationCost { rounds: m });
            }
            let rows = match &noisy {
                None => ideal.map_branches(rho_in, |t| (t.probability.to_f64_lossy(), score(t)))?,
                Some(n) => n.map_branches(rho_in, |t| (t.probability.to_f64_lossy(), score(t)))?,
            };
            let mut total = 0.0;
            for (_, (p, s)) in rows {
                let (l, inf) = s?;
                mass[l] += p;
                loss[l] += p * inf;
                total += p * inf;
            }
            (total, 0.0, None)
        }
        Estimator::Sampled { samples, seed, workers } => {
            if samples == 0 {
                return Err(Error::InvalidArgument("sampling needs at least one trajectory".into()));
            }
            let rows = par_streams(seed, samples, workers, |_, rng| -> Result<(usize, f64)> {
                let t = match &noisy {
                    None => ideal.run(rho_in, rng)?,
                    Some(n) => n.run(rho_in, rng)?,
                };
                score(t)
            });
            let w = 1.0 / samples as f64;
            let mut values = Vec::with_capacity(samples as usize);
            for r in rows {
                let (l, inf) = r?;
                mass[l] += w;
                loss[l] += w * inf;
                values.push(inf);
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
    let per_bin = (0..modulus)
        .map(|l| BinStats {
            l,
            lost: (modulus - l) % modulus,
            probability: mass[l as usize],
            mean_infidelity: if mass[l as usize] > 0.0 { loss[l as usize] / mass[l as usize] } else { 0.0 },
        })
        .collect();
    Ok(InfidelityReport {
        modulus,
        rounds: m,
        t_tot: schedule.total_time(),
        total: total.clamp(0.0, 1.0),
        std_error,
        samples,
        noisy: model.is_some(),
        per_bin,
    })
}
