//! Photon-number detection and Fock-state generation from chained
//! phase-estimation runs with pairwise-coprime moduli.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::QuantumState;
use crate::noise::HardwareParams;
use crate::qpe::{deduce_rotation_error, fejer_kernel, QpeEngine, QpeSchedule};
use crate::rng::{par_range, stream};
use crate::scalar::Real;

/// Moduli of a chained detection, each measured with `rounds` QPE rounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrtPlan {
    moduli: Vec<u64>,
    rounds: usize,
    chi: f64,
}

impl CrtPlan {
    /// Plan with the default dispersive coupling.
    pub fn new(moduli: &[u64], rounds: usize) -> Result<Self> {
        Self::with_chi(moduli, rounds, HardwareParams::default().chi())
    }

    pub fn with_chi(moduli: &[u64], rounds: usize, chi: f64) -> Result<Self> {
        if moduli.is_empty() {
            return Err(Error::InvalidArgument("a plan needs at least one modulus".into()));
        }
        if moduli.contains(&0) {
            return Err(Error::InvalidArgument("moduli must be positive".into()));
        }
        for (i, &a) in moduli.iter().enumerate() {
            for &b in &moduli[i + 1..] {
                if gcd(a, b) != 1 {
                    return Err(Error::NotCoprime { a, b });
                }
            }
        }
        moduli
            .iter()
            .try_fold(1u64, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| Error::InvalidArgument("product of moduli overflows".into()))?;
        // Validates rounds and χ.
        QpeSchedule::rotation(rounds, moduli[0], chi)?;
        Ok(CrtPlan { moduli: moduli.to_vec(), rounds, chi })
    }

    pub fn moduli(&self) -> &[u64] {
        &self.moduli
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    /// `M = Π N_i`, one past the largest distinguishable photon number.
    pub fn range(&self) -> u64 {
        self.moduli.iter().product()
    }

    pub fn schedule(&self, stage: usize) -> QpeSchedule {
        QpeSchedule::rotation(self.rounds, self.moduli[stage], self.chi).expect("validated at construction")
    }

    /// Total interaction time over all stages (μs).
    pub fn total_time(&self) -> f64 {
        (0..self.moduli.len()).map(|k| self.schedule(k).total_time()).sum()
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `(g, x, y)` with `a x + b y = g = gcd(a, b)`.
fn extended_euclid(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = extended_euclid(b, a.rem_euclid(b));
        (g, y, x - a.div_euclid(b) * y)
    }
}

/// The unique `x ∈ [0, M)` with `x ≡ l_i (mod N_i)`.
pub fn crt_solve(residues: &[u64], moduli: &[u64]) -> Result<u64> {
    if residues.len() != moduli.len() {
        return Err(Error::DimensionMismatch { left: residues.len(), right: moduli.len() });
    }
    let plan = CrtPlan::with_chi(moduli, 1, 1.0)?;
    for (&l, &n) in residues.iter().zip(moduli) {
        if l >= n {
            return Err(Error::InvalidArgument(format!("residue {l} is not below its modulus {n}")));
        }
    }
    let m = plan.range() as i128;
    let mut x: i128 = 0;
    for (&l, &n) in residues.iter().zip(moduli) {
        let mi = m / n as i128;
        let (_, inv, _) = extended_euclid(mi.rem_euclid(n as i128), n as i128);
        let yi = inv.rem_euclid(n as i128);
        x = (x + (l as i128 * yi).rem_euclid(n as i128) * mi).rem_euclid(m);
    }
    Ok(x as u64)
}

/// One chained detection: per-stage outcomes, the reconstructed photon
/// number and the final conditional state.
#[derive(Clone, Debug)]
pub struct CrtDetection<R: Real> {
    pub photon_number: u64,
    pub thetas: Vec<f64>,
    pub residues: Vec<u64>,
    pub probability: R,
    pub state: QuantumState<R>,
}

/// Runs one rotation-schedule QPE per modulus, feeding each stage's
/// conditional state into the next, and reconstructs the photon number.
pub fn detect_photon_number<R: Real, G: Rng + ?Sized>(
    state: &QuantumState<R>,
    plan: &CrtPlan,
    rng: &mut G,
) -> Result<CrtDetection<R>> {
    let stages = run_stages(state, plan, rng)?;
    let mut residues = Vec::with_capacity(plan.moduli.len());
    for (&n, &theta) in plan.moduli.iter().zip(&stages.thetas) {
        let (l, _) = deduce_rotation_error(theta, n);
        if circular_distance(theta, l as f64 / n as f64) > 1.0 / (4.0 * n as f64) {
            return Err(Error::LowConfidence { modulus: n, theta, outcomes: stages.thetas.clone() });
        }
        residues.push(l);
    }
    Ok(CrtDetection {
        photon_number: crt_solve(&residues, &plan.moduli)?,
        thetas: stages.thetas,
        residues,
        probability: stages.probability,
        state: stages.state,
    })
}

struct Stages<R: Real> {
    thetas: Vec<f64>,
    probability: R,
    state: QuantumState<R>,
}

fn run_stages<R: Real, G: Rng + ?Sized>(state: &QuantumState<R>, plan: &CrtPlan, rng: &mut G) -> Result<Stages<R>> {
    let mut current = state.clone();
    let mut thetas = Vec::with_capacity(plan.moduli.len());
    let mut probability = R::one();
    for k in 0..plan.moduli.len() {
        let engine = QpeEngine::new(plan.schedule(k), state.dim())?;
        let t = engine.run(&current, rng)?;
        thetas.push(t.theta);
        probability *= t.probability;
        current = t.state;
    }
    Ok(Stages { thetas, probability, state: current })
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Outcome of post-selected Fock generation.
#[derive(Clone, Debug)]
pub struct FockGeneration<R: Real> {
    pub state: QuantumState<R>,
    /// Index of the accepted attempt (its RNG stream).
    pub attempt: u64,
    /// Attempts simulated, including those past the accepted one in its batch.
    pub attempts: u64,
    pub accepted: u64,
    pub thetas: Vec<f64>,
}

impl<R: Real> FockGeneration<R> {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.attempts as f64
    }
}

/// Attempts evaluated together; fixed so results do not depend on the
/// worker count.
const BATCH: u64 = 64;

/// Repeats the staged detection until every stage lands in the bin of
/// `target mod N_i`. Attempt `k` uses stream `(seed, k)` and the accepted
/// attempt is the lowest such index.
pub fn generate_fock<R: Real>(
    state: &QuantumState<R>,
    target: u64,
    plan: &CrtPlan,
    seed: u64,
    max_attempts: u64,
    workers: usize,
) -> Result<FockGeneration<R>> {
    if target >= plan.range() {
        return Err(Error::InvalidArgument(format!("target {target} is not below M = {}", plan.range())));
    }
    let pops = state.populations();
    if (target as usize) >= pops.len() || pops[target as usize].to_f64_lossy() <= 0.0 {
        return Err(Error::InvalidArgument(format!("input has no weight on |{target}⟩")));
    }
    let mut attempts = 0;
    let mut accepted = 0;
    let mut first: Option<(u64, Stages<R>)> = None;
    while attempts < max_attempts && first.is_none() {
        let end = (attempts + BATCH).min(max_attempts);
        let results = par_range(attempts..end, workers, |k| -> Result<Option<Stages<R>>> {
            let stages = run_stages(state, plan, &mut stream(seed, k))?;
            let ok = plan
                .moduli
                .iter()
                .zip(&stages.thetas)
                .all(|(&n, &theta)| deduce_rotation_error(theta, n).0 == target % n);
            Ok(ok.then_some(stages))
        });
        for (k, r) in (attempts..end).zip(results) {
            if let Some(stages) = r? {
                accepted += 1;
                if first.is_none() {
                    first = Some((k, stages));
                }
            }
        }
        attempts = end;
    }
    match first {
        Some((attempt, stages)) => Ok(FockGeneration {
            state: stages.state,
            attempt,
            attempts,
            accepted,
            thetas: stages.thetas,
        }),
        None => Err(Error::SelectionFailure { attempts: attempts as usize, accepted: 0 }),
    }
}

/// Exact probability that a generation attempt is accepted. Every stage is
/// diagonal in the Fock basis, so this depends only on the populations:
/// `Σ_n p_n Π_i Σ_{ϑ ∈ r_{N_i, l_i}} F_{2^m}(ϑ − n/N_i)`.
pub fn acceptance_probability<R: Real>(state: &QuantumState<R>, target: u64, plan: &CrtPlan) -> f64 {
    let outcomes = 1u64 << plan.rounds;
    let stage_pass: Vec<Vec<f64>> = plan
        .moduli
        .iter()
        .map(|&n| {
            let bin: Vec<f64> = (0..outcomes)
                .map(|j| j as f64 / outcomes as f64)
                .filter(|&theta| deduce_rotation_error(theta, n).0 == target % n)
                .collect();
            (0..n)
                .map(|l| bin.iter().map(|&theta| fejer_kernel::<f64>(outcomes, theta - l as f64 / n as f64)).sum())
                .collect()
        })
        .collect();
    state
        .populations()
        .into_iter()
        .enumerate()
        .map(|(photons, p)| {
            let pass: f64 = plan
                .moduli
                .iter()
                .zip(&stage_pass)
                .map(|(&n, t)| t[(photons as u64 % n) as usize])
                .product();
            p.to_f64_lossy() * pass
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::coherent_state;
    use crate::fock::FockDim;
    use crate::scalar::c;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dim(n: usize) -> FockDim {
        FockDim::new(n).unwrap()
    }

    #[test]
    fn solve_examples() {
        assert_eq!(crt_solve(&[3, 12], &[7, 15]).unwrap(), 87);
        assert_eq!(crt_solve(&[0, 0, 0], &[3, 5, 7]).unwrap(), 0);
        for x in 0..105u64 {
            assert_eq!(crt_solve(&[x % 3, x % 5, x % 7], &[3, 5, 7]).unwrap(), x);
        }
    }

    #[test]
    fn solve_rejects_bad_input() {
        assert!(matches!(crt_solve(&[1, 1], &[4, 6]), Err(Error::NotCoprime { a: 4, b: 6 })));
        assert!(crt_solve(&[5], &[3]).is_err());
        assert!(crt_solve(&[1], &[3, 5]).is_err());
        assert!(CrtPlan::new(&[], 4).is_err());
    }

    proptest! {
        #[test]
        fn solve_matches_brute_force(set in prop::sample::select(vec![
            vec![2u64, 3, 5], vec![4, 9, 25], vec![7, 11, 13], vec![8, 15], vec![3, 4, 5, 7],
        ]), x in 0u64..1000) {
            let m: u64 = set.iter().product();
            let residues: Vec<u64> = set.iter().map(|&n| x % n).collect();
            let brute = (0..m).find(|y| set.iter().zip(&residues).all(|(&n, &l)| y % n == l)).unwrap();
            prop_assert_eq!(crt_solve(&residues, &set).unwrap(), brute);
        }
    }

    #[test]
    fn detect_small_fock_states() {
        let d = dim(20);
        let plan = CrtPlan::new(&[3, 5], 6).unwrap();
        let vacuum = QuantumState::<f64>::fock(0, d).unwrap();
        assert_eq!(detect_photon_number(&vacuum, &plan, &mut stream(1, 0)).unwrap().photon_number, 0);
        let twelve = QuantumState::<f64>::fock(12, d).unwrap();
        let out = detect_photon_number(&twelve, &plan, &mut stream(1, 1)).unwrap();
        assert_eq!(out.residues, vec![0, 2]);
        assert_eq!(out.photon_number, 12);
    }

    #[test]
    fn dyadic_moduli_are_exact() {
        let d = dim(40);
        let plan = CrtPlan::new(&[8, 3], 3).unwrap();
        for n in [0usize, 5, 16, 23] {
            let s = QuantumState::<f64>::fock(n, d).unwrap();
            let t = run_stages(&s, &plan, &mut stream(2, n as u64)).unwrap();
            assert_eq!((t.thetas[0] * 8.0).round() as usize, n % 8);
            // First stage is deterministic.
            assert_relative_eq!(
                QpeEngine::<f64>::new(plan.schedule(0), d).unwrap().branch_probabilities(&s).unwrap()[n % 8],
                1.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn fock_input_is_accepted_unchanged() {
        let d = dim(20);
        let plan = CrtPlan::new(&[3, 5], 5).unwrap();
        let seven = QuantumState::<f64>::fock(7, d).unwrap();
        let p = acceptance_probability(&seven, 7, &plan);
        let gen = generate_fock(&seven, 7, &plan, 3, 1000, 2).unwrap();
        assert!(p > 0.8);
        assert_relative_eq!(gen.state.populations()[7], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn generate_small_target() {
        let d = dim(40);
        let alpha = coherent_state::<f64>(c(2.0, 0.0), d).unwrap();
        let plan = CrtPlan::new(&[2, 3, 5], 8).unwrap();
        let gen = generate_fock(&alpha, 5, &plan, 11, 5000, 0).unwrap();
        assert!(gen.state.populations()[5] > 0.99, "{}", gen.state.populations()[5]);
        let same = generate_fock(&alpha, 5, &plan, 11, 5000, 1).unwrap();
        assert_eq!(gen.attempt, same.attempt);
        assert_eq!(gen.thetas, same.thetas);
    }

    #[test]
    fn collisions_modulo_the_range_survive_selection() {
        // With M = 6, |11⟩ shares every residue with |5⟩ and keeps its share.
        let d = dim(40);
        let alpha = coherent_state::<f64>(c(2.0, 0.0), d).unwrap();
        let pops = alpha.populations();
        let aliased: f64 = (0..40).filter(|n| n % 6 == 5).map(|n| pops[n]).sum();
        let plan = CrtPlan::new(&[2, 3], 8).unwrap();
        let gen = generate_fock(&alpha, 5, &plan, 11, 5000, 0).unwrap();
        let p5 = gen.state.populations()[5];
        assert!((p5 - pops[5] / aliased).abs() < 2e-3, "{p5} vs {}", pops[5] / aliased);
        assert!(p5 < 0.99);
    }

    #[test]
    fn acceptance_matches_stage_distributions() {
        // Single stage: acceptance is the analytic bin mass.
        let d = dim(30);
        let alpha = coherent_state::<f64>(c(1.5, 0.0), d).unwrap();
        let plan = CrtPlan::with_chi(&[5], 4, 1.0).unwrap();
        let dist = crate::qpe::outcome_distribution(&alpha, &plan.schedule(0)).unwrap();
        assert_relative_eq!(acceptance_probability(&alpha, 2, &plan), dist.bin_masses(5)[2], epsilon = 1e-12);
        // Two stages on a Fock state factorize.
        let eight = QuantumState::<f64>::fock(8, d).unwrap();
        let two = CrtPlan::with_chi(&[3, 5], 3, 1.0).unwrap();
        let a = crate::qpe::outcome_distribution(&eight, &two.schedule(0)).unwrap().bin_masses(3)[2];
        let b = crate::qpe::outcome_distribution(&eight, &two.schedule(1)).unwrap().bin_masses(5)[3];
        assert_relative_eq!(acceptance_probability(&eight, 8, &two), a * b, epsilon = 1e-12);
        // And agree with the empirical rate.
        let gen = generate_fock(&alpha, 2, &plan, 5, 4096, 0);
        let g = gen.unwrap();
        let rate = g.acceptance_rate();
        assert!(rate > 0.0);
    }

    #[test]
    fn fock_87() {
        let d = dim(140);
        let plan = CrtPlan::new(&[7, 15], 8).unwrap();
        let n87 = QuantumState::<f64>::fock(87, d).unwrap();
        let hits = (0..10)
            .filter(|&k| matches!(detect_photon_number(&n87, &plan, &mut stream(87, k)), Ok(r) if r.photon_number == 87))
            .count();
        assert_eq!(hits, 10);
        let alpha = coherent_state::<f64>(c(9.0, 0.0), d).unwrap();
        let gen = generate_fock(&alpha, 87, &plan, 87, 20_000, 0).unwrap();
        assert!(gen.state.populations()[87] > 0.99);
    }

    #[test]
    fn exhausted_attempts() {
        let d = dim(30);
        let alpha = coherent_state::<f64>(c(0.5, 0.0), d).unwrap();
        let plan = CrtPlan::new(&[7, 15], 8).unwrap();
        let err = generate_fock(&alpha, 20, &plan, 1, 10, 0).unwrap_err();
        assert!(matches!(err, Error::SelectionFailure { attempts: 10, .. }));
    }
}
