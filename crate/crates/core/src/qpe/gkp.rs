use serde::{Deserialize, Serialize};

use super::engine::QpeEngine;
use super::noisy::{choose, quadrature_coupling, NoisyEngine};
use crate::noise::{hardware_model, HardwareParams};
use super::schedule::{outcome_index, theta_of, Axis, FeedbackRegister, QpeSchedule};
use crate::error::Result;
use crate::fock::{displacement, FockDim, QuantumState};
use crate::scalar::{c, Real};
use rand::{Rng, RngExt};

/// Outcome of a dual-quadrature detection run. Displacements are in units
/// of √π.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GkpOutcome {
    pub bits_x: Vec<u8>,
    pub bits_p: Vec<u8>,
    pub theta_x: f64,
    pub theta_p: f64,
    pub delta_x: f64,
    pub delta_p: f64,
}

impl GkpOutcome {
    pub fn from_bits(bits_x: &[u8], bits_p: &[u8]) -> Self {
        let theta_x = theta_of(bits_x);
        let theta_p = theta_of(bits_p);
        GkpOutcome {
            bits_x: bits_x.to_vec(),
            bits_p: bits_p.to_vec(),
            theta_x,
            theta_p,
            delta_x: centred(theta_x),
            delta_p: centred(theta_p),
        }
    }

    /// `(j_x, j_p)` outcome indices.
    pub fn indices(&self) -> (u64, u64) {
        (outcome_index(&self.bits_x), outcome_index(&self.bits_p))
    }

    /// Detected displacement `Δx = ϑ(x)√π mod √π` in phase-space units.
    pub fn displacement_x(&self) -> f64 {
        self.theta_x * std::f64::consts::PI.sqrt()
    }

    pub fn displacement_p(&self) -> f64 {
        self.theta_p * std::f64::consts::PI.sqrt()
    }

    /// `(δ(x) + iδ(p))√(π/2)`, the displacement amplitude of the reference.
    pub fn alpha(&self) -> (f64, f64) {
        let s = (std::f64::consts::PI / 2.0).sqrt();
        (self.delta_x * s, self.delta_p * s)
    }
}

/// `ϑ − round(ϑ)` in `[−0.5, 0.5)`.
pub fn centred(theta: f64) -> f64 {
    let d = theta - theta.round();
    if d >= 0.5 {
        d - 1.0
    } else if d < -0.5 {
        d + 1.0
    } else if (d - 0.5).abs() < f64::EPSILON {
        -0.5
    } else {
        d
    }
}

/// A detection run: the outcome, its probability and the conditional state
/// after the frame correction.
#[derive(Clone, Debug)]
pub struct GkpTrajectory<R: Real> {
    pub outcome: GkpOutcome,
    pub probability: R,
    pub state: QuantumState<R>,
}

/// Dual-register GKP syndrome detector: round `i` runs a Q cell and then a
/// P cell, each with its own feedback register.
#[derive(Clone, Debug)]
pub struct GkpDetector<R: Real> {
    q: QpeEngine<R>,
    p: QpeEngine<R>,
    noise: Option<Box<[NoisyEngine<R>; 2]>>,
    frame_correction: bool,
}

impl<R: Real> GkpDetector<R> {
    pub fn new(rounds: usize, g: f64, dim: FockDim) -> Result<Self> {
        Ok(GkpDetector {
            q: QpeEngine::new(QpeSchedule::quadrature(rounds, Axis::Q, g)?, dim)?,
            p: QpeEngine::new(QpeSchedule::quadrature(rounds, Axis::P, g)?, dim)?,
            noise: None,
            frame_correction: true,
        })
    }

    /// Integrates every cell under the hardware model instead of applying
    /// the ideal Kraus pair. The coupling `g` comes from `params`.
    pub fn with_noise(rounds: usize, dim: FockDim, params: &HardwareParams) -> Result<Self> {
        let mut det = Self::new(rounds, params.g(), dim)?;
        let engine = |axis: Axis| -> Result<NoisyEngine<R>> {
            let model = hardware_model(quadrature_coupling(axis), dim, params)?;
            NoisyEngine::new(*det.engine(axis).schedule(), model)
        };
        det.noise = Some(Box::new([engine(Axis::Q)?, engine(Axis::P)?]));
        Ok(det)
    }

    pub fn is_noisy(&self) -> bool {
        self.noise.is_some()
    }

    fn cell(&self, axis: Axis, state: &QuantumState<R>, i: usize, phi: f64) -> Result<[(R, Option<QuantumState<R>>); 2]> {
        match (&self.noise, axis) {
            (Some(n), Axis::Q) => n[0].cell(state, i, phi),
            (Some(n), Axis::P) => n[1].cell(state, i, phi),
            (None, _) => self.engine(axis).cell(state, i, phi),
        }
    }

    /// Leaves the conditional states exactly as the cells produce them,
    /// without undoing the outcome-dependent sign pattern.
    pub fn without_frame_correction(mut self) -> Self {
        self.frame_correction = false;
        self
    }

    pub fn rounds(&self) -> usize {
        self.q.schedule().rounds()
    }

    pub fn dim(&self) -> FockDim {
        self.q.dim()
    }

    pub fn engine(&self, axis: Axis) -> &QpeEngine<R> {
        match axis {
            Axis::Q => &self.q,
            Axis::P => &self.p,
        }
    }

    /// Interaction time of both registers together.
    pub fn total_time(&self) -> f64 {
        2.0 * self.q.schedule().total_time()
    }

    /// Samples one run; each of the `2m` cells consumes one uniform draw.
    pub fn run<G: Rng + ?Sized>(&self, state: &QuantumState<R>, rng: &mut G) -> Result<GkpTrajectory<R>> {
        let mut current = state.clone();
        let (mut rx, mut rp) = (FeedbackRegister::new(), FeedbackRegister::new());
        let mut probability = R::one();
        for i in 1..=self.rounds() {
            for (axis, reg) in [(Axis::Q, &mut rx), (Axis::P, &mut rp)] {
                let [b0, b1] = self.cell(axis, &current, i, reg.phase())?;
                let u: f64 = rng.random();
                let (p, s, bit) = choose(b0, b1, u)?;
                probability *= p;
                current = s;
                reg.push(bit);
            }
        }
        self.finish(current, rx, rp, probability)
    }

    fn finish(
        &self,
        state: QuantumState<R>,
        rx: FeedbackRegister,
        rp: FeedbackRegister,
        probability: R,
    ) -> Result<GkpTrajectory<R>> {
        let outcome = GkpOutcome::from_bits(rx.bits(), rp.bits());
        let state = if self.frame_correction {
            let s = self.q.frame_correct(&state, outcome.theta_x)?;
            self.p.frame_correct(&s, outcome.theta_p)?
        } else {
            state
        };
        Ok(GkpTrajectory { outcome, probability, state })
    }

    /// Maps every reachable `(ϑ_x, ϑ_p)` branch through `f`; results are
    /// ordered by `(j_x, j_p)`.
    pub fn map_branches<T, F>(&self, state: &QuantumState<R>, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(GkpTrajectory<R>) -> Result<T> + Sync,
    {
        let mut out = self.descend(state.clone(), FeedbackRegister::new(), FeedbackRegister::new(), R::one(), &f)?;
        out.sort_by_key(|(k, _)| *k);
        Ok(out.into_iter().map(|(_, t)| t).collect())
    }

    fn descend<T, F>(
        &self,
        state: QuantumState<R>,
        rx: FeedbackRegister,
        rp: FeedbackRegister,
        probability: R,
        f: &F,
    ) -> Result<Vec<((u64, u64), T)>>
    where
        T: Send,
        F: Fn(GkpTrajectory<R>) -> Result<T> + Sync,
    {
        let m = self.rounds();
        let depth = rx.bits().len() + rp.bits().len();
        if depth == 2 * m {
            let key = (outcome_index(rx.bits()), outcome_index(rp.bits()));
            return Ok(vec![(key, f(self.finish(state, rx, rp, probability)?)?)]);
        }
        let q_turn = rx.bits().len() == rp.bits().len();
        let (axis, reg) = if q_turn { (Axis::Q, &rx) } else { (Axis::P, &rp) };
        let branches = self.cell(axis, &state, reg.bits().len() + 1, reg.phase())?;
        let child = |alpha: u8, (p, s): (R, Option<QuantumState<R>>)| -> Result<Vec<((u64, u64), T)>> {
            let Some(s) = s else { return Ok(Vec::new()) };
            let (mut x, mut y) = (rx.clone(), rp.clone());
            if q_turn { x.push(alpha) } else { y.push(alpha) }
            self.descend(s, x, y, probability * p, f)
        };
        let [b0, b1] = branches;
        let (a, b) = if depth < 6 {
            rayon::join(|| child(0, b0), || child(1, b1))
        } else {
            (child(0, b0), child(1, b1))
        };
        let mut a = a?;
        a.extend(b?);
        Ok(a)
    }

    /// Every reachable branch with its conditional state.
    pub fn enumerate(&self, state: &QuantumState<R>) -> Result<Vec<GkpTrajectory<R>>> {
        self.map_branches(state, Ok)
    }
}

/// `D[(δ(x) + iδ(p))√(π/2)] ρ D†`, the state the detector should leave behind
/// if the outcome reports an actual displacement.
pub fn gkp_reference<R: Real>(ideal: &QuantumState<R>, outcome: &GkpOutcome) -> Result<QuantumState<R>> {
    let (re, im) = outcome.alpha();
    let d = displacement::<R>(c(re, im), ideal.dim())?;
    let mut out = ideal.transform(&d)?;
    out.normalize_in_place();
    Ok(out)
}

pub fn run_gkp_detection<R: Real, G: Rng + ?Sized>(
    state: &QuantumState<R>,
    rounds: usize,
    g: f64,
    rng: &mut G,
) -> Result<GkpTrajectory<R>> {
    GkpDetector::new(rounds, g, state.dim())?.run(state, rng)
}
