use super::engine::QpeEngine;
use super::schedule::{outcome_bits, Axis, QpeSchedule};
use crate::error::{Error, Result};
use crate::fock::QuantumState;
use crate::scalar::Real;

/// Selection probabilities below this make a target trajectory unreachable.
pub const MIN_SELECTION: f64 = 1e-12;

/// A post-selected preparation run.
#[derive(Clone, Debug)]
pub struct Preparation<R: Real> {
    pub state: QuantumState<R>,
    /// Probability of the selected trajectory.
    pub probability: R,
    pub bits: Vec<u8>,
    /// Conditional state after each round, starting with round 1.
    pub steps: Vec<QuantumState<R>>,
}

/// Projects a primitive state onto `|μ⟩` of the order-`N` rotation code by
/// running the 2N-fold rotation schedule and keeping the trajectory
/// `ϑ = 0.μ` (binary).
pub fn prepare_by_projection<R: Real>(
    primitive: &QuantumState<R>,
    modulus: u64,
    mu: u8,
    rounds: usize,
    chi: f64,
) -> Result<Preparation<R>> {
    if mu > 1 {
        return Err(Error::InvalidArgument(format!("logical index must be 0 or 1, got {mu}")));
    }
    let schedule = QpeSchedule::rotation(rounds, 2 * modulus, chi)?;
    let engine = QpeEngine::new(schedule, primitive.dim())?;
    let target = (mu as u64) << (rounds - 1);
    select(&engine, primitive, &outcome_bits(target, rounds))
}

/// Projects a squeezed state onto the finite-energy GKP word `|μ⟩` by
/// measuring Q with period 2√π and keeping `ϑ = μ/2`. The outcome frame is
/// undone afterwards.
pub fn prepare_gkp_by_projection<R: Real>(
    squeezed: &QuantumState<R>,
    mu: u8,
    rounds: usize,
    g: f64,
) -> Result<Preparation<R>> {
    if mu > 1 {
        return Err(Error::InvalidArgument(format!("logical index must be 0 or 1, got {mu}")));
    }
    let schedule = QpeSchedule::gkp_preparation(rounds, Axis::Q, g)?;
    let engine = QpeEngine::new(schedule, squeezed.dim())?;
    let target = (mu as u64) << (rounds - 1);
    let mut prep = select(&engine, squeezed, &outcome_bits(target, rounds))?;
    let theta = mu as f64 / 2.0;
    prep.state = engine.frame_correct(&prep.state, theta)?;
    Ok(prep)
}

fn select<R: Real>(engine: &QpeEngine<R>, input: &QuantumState<R>, bits: &[u8]) -> Result<Preparation<R>> {
    let mut steps = Vec::with_capacity(bits.len());
    let mut current = input.clone();
    let mut probability = R::one();
    let mut reg = super::FeedbackRegister::new();
    for (k, &b) in bits.iter().enumerate() {
        let branches = engine.cell(&current, k + 1, reg.phase())?;
        let (p, next) = branches[b as usize].clone();
        probability *= p;
        match next {
            Some(s) if probability.to_f64_lossy() >= MIN_SELECTION => current = s,
            _ => return Err(Error::Unreachable { probability: probability.to_f64_lossy().max(0.0) }),
        }
        reg.push(b);
        steps.push(current.clone());
    }
    Ok(Preparation { state: current, probability, bits: bits.to_vec(), steps })
}
