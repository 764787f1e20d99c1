//! Adaptive Ramsey-interferometry phase estimation as a sequence of Kraus
//! channels: sampling, exact enumeration and syndrome deduction.

mod engine;
mod gkp;
mod noisy;
mod prep;
mod schedule;
mod stats;

pub use engine::{
    closed_form_superoperator, rim_cell, rim_kraus, run_trajectory, trajectory_superoperator, CellOutcome,
    Coupling, QpeEngine, Trajectory, PRUNE,
};
pub use stats::{kernel_mixture, outcome_distribution, residue_weights, OutcomeDistribution};
pub use gkp::{centred, gkp_reference, run_gkp_detection, GkpDetector, GkpOutcome, GkpTrajectory};
pub use prep::{prepare_by_projection, prepare_gkp_by_projection, Preparation, MIN_SELECTION};
pub use noisy::{quadrature_coupling, run_noisy_trajectory, NoisyEngine};
pub use schedule::{
    feedback_phase, outcome_bits, outcome_index, theta_of, Axis, FeedbackRegister, QpeSchedule, ScheduleKind,
    MAX_ROUNDS,
};

use crate::scalar::Real;

/// `F_n(x) = [sin(nπx) / (n sin πx)]²`, with the limit 1 at integer `x`.
pub fn fejer_kernel<R: Real>(n: u64, x: R) -> R {
    assert!(n >= 1, "kernel order must be positive");
    // Reduce to [−1/2, 1/2] so the peak at integer x is resolved to full
    // relative precision.
    let x = x.to_f64_lossy();
    let x = x - x.round();
    let s = (std::f64::consts::PI * x).sin();
    if s.abs() < 1e-15 {
        return R::one();
    }
    let nf = n as f64;
    let y = nf * x;
    let num = (std::f64::consts::PI * (y - 2.0 * (y / 2.0).round())).sin();
    let r = num / (nf * s);
    R::lit((r * r).min(1.0))
}

/// Residue `l` of the bin `[l/N − 1/2N, l/N + 1/2N)` containing `θ`, and the
/// number of lost excitations `(N − l) mod N`.
pub fn deduce_rotation_error(theta: f64, modulus: u64) -> (u64, u64) {
    assert!(modulus >= 1, "modulus must be positive");
    let n = modulus as f64;
    let l = ((theta * n + 0.5).floor() as i64).rem_euclid(modulus as i64) as u64;
    (l, (modulus - l) % modulus)
}
