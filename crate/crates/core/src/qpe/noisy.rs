use nalgebra::Matrix2;
use rand::{Rng, RngExt};

use super::engine::{Trajectory, PRUNE};
use super::schedule::{outcome_index, theta_of, Axis, FeedbackRegister, QpeSchedule, ScheduleKind};
use crate::error::{Error, Result};
use crate::fock::QuantumState;
use crate::noise::{lindblad_evolve, CompositeState, LindbladModel};
use crate::scalar::{c, cis, cr, Real, C};

/// Phase estimation with each free-evolution window integrated under a
/// Lindblad model of the ancilla and mode. The ancilla starts every cell in
/// `(|0⟩ − i|1⟩)/√2`, is read out projectively along
/// `(|0⟩ + i(−1)^α e^{−iφ}|1⟩)/√2` and is reset afterwards.
#[derive(Clone, Debug)]
pub struct NoisyEngine<R: Real> {
    schedule: QpeSchedule,
    model: LindbladModel<R>,
}

/// Relative tolerance when matching model couplings to a schedule.
const COUPLING_TOL: f64 = 1e-9;

impl<R: Real> NoisyEngine<R> {
    pub fn new(schedule: QpeSchedule, model: LindbladModel<R>) -> Result<Self> {
        check_model(&schedule, &model)?;
        Ok(NoisyEngine { schedule, model })
    }

    pub fn schedule(&self) -> &QpeSchedule {
        &self.schedule
    }

    pub fn model(&self) -> &LindbladModel<R> {
        &self.model
    }

    /// One noisy cell of round `i`: branch probabilities and normalized
    /// conditional mode states.
    pub fn cell(&self, state: &QuantumState<R>, i: usize, phi: f64) -> Result<[(R, Option<QuantumState<R>>); 2]> {
        let half = R::lit(0.5);
        let ancilla = Matrix2::new(cr(half), c::<R>(0.0, 0.5), c::<R>(0.0, -0.5), cr(half));
        let rho = CompositeState::product_unchecked(&ancilla, state);
        let rho = lindblad_evolve(&rho, &self.model, R::lit(self.schedule.time(i)))?;
        let blocks = [[rho.mode_block(0, 0), rho.mode_block(0, 1)], [rho.mode_block(1, 0), rho.mode_block(1, 1)]];
        let branch = |alpha: usize| {
            let sign = if alpha == 0 { 1.0 } else { -1.0 };
            // r = (1, −i(−1)^α e^{iφ})/√2 applied without conjugation on the ket side.
            let r1: C<R> = c::<R>(0.0, -sign) * cis(R::lit(phi));
            let r = [cr(R::one()), r1];
            let mut m = &blocks[0][0] * cr(R::zero());
            for a in 0..2 {
                for b in 0..2 {
                    m += &blocks[a][b] * (r[a] * r[b].conj() * cr(half));
                }
            }
            let m = (&m + m.adjoint()) * cr(half);
            let p = m.trace().re;
            if p.to_f64_lossy() < PRUNE {
                return (p.max(R::zero()), None);
            }
            (p, Some(QuantumState::density_unchecked(m * cr(R::one() / p))))
        };
        Ok([branch(0), branch(1)])
    }

    /// Samples one trajectory with one uniform draw per cell.
    pub fn run<G: Rng + ?Sized>(&self, state: &QuantumState<R>, rng: &mut G) -> Result<Trajectory<R>> {
        self.model.dim().check(state.dim())?;
        let mut current = state.clone();
        let mut reg = FeedbackRegister::new();
        let mut probability = R::one();
        for i in 1..=self.schedule.rounds() {
            let [b0, b1] = self.cell(&current, i, reg.phase())?;
            let u: f64 = rng.random();
            let (p, s, bit) = choose(b0, b1, u)?;
            probability *= p;
            current = s;
            reg.push(bit);
        }
        let bits = reg.bits().to_vec();
        Ok(Trajectory { theta: theta_of(&bits), bits, probability, state: current })
    }

    /// Maps every reachable trajectory through `f`, in outcome order.
    pub fn map_branches<T, F>(&self, state: &QuantumState<R>, f: F) -> Result<Vec<(u64, T)>>
    where
        T: Send,
        F: Fn(Trajectory<R>) -> T + Sync,
    {
        self.model.dim().check(state.dim())?;
        let mut out = self.descend(state.clone(), FeedbackRegister::new(), R::one(), &f)?;
        out.sort_by_key(|(j, _)| *j);
        Ok(out)
    }

    fn descend<T, F>(&self, state: QuantumState<R>, reg: FeedbackRegister, probability: R, f: &F) -> Result<Vec<(u64, T)>>
    where
        T: Send,
        F: Fn(Trajectory<R>) -> T + Sync,
    {
        let depth = reg.bits().len();
        if depth == self.schedule.rounds() {
            let bits = reg.bits().to_vec();
            let j = outcome_index(&bits);
            return Ok(vec![(j, f(Trajectory { theta: theta_of(&bits), bits, probability, state }))]);
        }
        let [b0, b1] = self.cell(&state, depth + 1, reg.phase())?;
        let child = |bit: u8, (p, s): (R, Option<QuantumState<R>>)| -> Result<Vec<(u64, T)>> {
            let Some(s) = s else { return Ok(Vec::new()) };
            let mut r = reg.clone();
            r.push(bit);
            self.descend(s, r, probability * p, f)
        };
        let (a, b) = rayon::join(|| child(0, b0), || child(1, b1));
        let mut a = a?;
        a.extend(b?);
        Ok(a)
    }

    pub fn branch_probabilities(&self, state: &QuantumState<R>) -> Result<Vec<R>> {
        let mut p = vec![R::zero(); self.schedule.outcomes() as usize];
        for (j, prob) in self.map_branches(state, |t| t.probability)? {
            p[j as usize] = prob;
        }
        Ok(p)
    }
}

pub(crate) fn choose<R: Real>(
    b0: (R, Option<QuantumState<R>>),
    b1: (R, Option<QuantumState<R>>),
    u: f64,
) -> Result<(R, QuantumState<R>, u8)> {
    match (b0, b1) {
        ((p, Some(s)), (_, None)) => Ok((p, s, 0)),
        ((_, None), (p, Some(s))) => Ok((p, s, 1)),
        ((_, None), (_, None)) => Err(Error::Numeric("both cell branches vanished")),
        ((p0, Some(s0)), (p1, Some(s1))) => {
            let (a, b) = (p0.to_f64_lossy(), p1.to_f64_lossy());
            if u * (a + b) < a {
                Ok((p0, s0, 0))
            } else {
                Ok((p1, s1, 1))
            }
        }
    }
}

/// Checks that the model's Hamiltonian is the coupling the schedule was
/// timed for.
fn check_model<R: Real>(schedule: &QpeSchedule, model: &LindbladModel<R>) -> Result<()> {
    let d = model.dim().get();
    let h = model.hamiltonian();
    let entry = |r: usize, col: usize| -> C<R> {
        h.entries().iter().filter(|e| e.0 == r && e.1 == col).fold(cr(R::zero()), |s, e| s + e.2)
    };
    let close = |a: C<R>, b: (f64, f64)| {
        let (re, im) = (a.re.to_f64_lossy(), a.im.to_f64_lossy());
        let scale = (b.0 * b.0 + b.1 * b.1).sqrt().max(1e-300);
        ((re - b.0).powi(2) + (im - b.1).powi(2)).sqrt() <= COUPLING_TOL * scale
    };
    let mismatch = |what: &str| Err(Error::InvalidArgument(format!("noise model does not match the schedule: {what}")));
    match schedule.kind() {
        ScheduleKind::Rotation { chi, .. } => {
            if !h.is_diagonal() || d < 2 || !close(entry(d + 1, d + 1), (-chi, 0.0)) {
                return mismatch("expected the dispersive Hamiltonian −χ|1⟩⟨1|⊗n̂ with the schedule's χ");
            }
        }
        ScheduleKind::Quadrature { axis, g, .. } => {
            let theta = axis.theta();
            // ⟨0|⊗⟨0| H |0⟩⊗|1⟩ = g e^{−iθ}
            if d < 2 || !close(entry(0, 1), (g * theta.cos(), -g * theta.sin())) {
                return mismatch("expected the quadrature coupling g σ_z ⊗ √2 X_θ with the schedule's g and axis");
            }
        }
        ScheduleKind::Custom { .. } => {}
    }
    Ok(())
}

pub fn run_noisy_trajectory<R: Real, G: Rng + ?Sized>(
    state: &QuantumState<R>,
    schedule: &QpeSchedule,
    model: &LindbladModel<R>,
    rng: &mut G,
) -> Result<Trajectory<R>> {
    NoisyEngine::new(*schedule, model.clone())?.run(state, rng)
}

/// Hardware coupling matching a quadrature axis.
pub fn quadrature_coupling(axis: Axis) -> crate::noise::HardwareCoupling {
    crate::noise::HardwareCoupling::Quadrature { theta: axis.theta() }
}
