use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};

use super::schedule::{outcome_index, theta_of, Axis, FeedbackRegister, QpeSchedule, ScheduleKind};
use crate::error::{Error, Result};
use crate::fock::{quadrature, FockDim, HermitianSpectrum, OperatorMatrix, QuantumState};
use crate::scalar::{cis, cr, norm_sqr, Real, C};

/// Per-cell branch probabilities below this are treated as exactly zero.
pub const PRUNE: f64 = 1e-14;

/// A generator eigenvalue divided by κ. Rational values keep the dyadic
/// phases of rotation codes exact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Ratio {
    Exact { num: i64, den: u64 },
    Approx(f64),
}

impl Ratio {
    pub(crate) fn value(self) -> f64 {
        match self {
            Ratio::Exact { num, den } => num as f64 / den as f64,
            Ratio::Approx(x) => x,
        }
    }

    fn add(self, other: Ratio) -> Ratio {
        match (self, other) {
            (Ratio::Exact { num: a, den: b }, Ratio::Exact { num: c, den: d }) => Ratio::Exact {
                num: a * d as i64 + c * b as i64,
                den: b * d,
            },
            _ => Ratio::Approx(self.value() + other.value()),
        }
    }

    fn neg(self) -> Ratio {
        match self {
            Ratio::Exact { num, den } => Ratio::Exact { num: -num, den },
            Ratio::Approx(x) => Ratio::Approx(-x),
        }
    }

    /// `2^k · self` reduced to `[0, 2)`.
    fn scaled_mod2(self, k: u32) -> f64 {
        match self {
            Ratio::Exact { num, den } => {
                let m = 2 * den as i128;
                let mut p: i128 = 1 % m;
                for _ in 0..k {
                    p = (2 * p) % m;
                }
                let r = (p * num as i128).rem_euclid(m);
                r as f64 / den as f64
            }
            Ratio::Approx(x) => (x * 2f64.powi(k as i32)).rem_euclid(2.0),
        }
    }
}

/// The cell generator in its eigenbasis: eigenvalues of the coupling `V`
/// and of a commuting free term `C`, both divided by κ, so that
/// `U_{α,i} = exp(−i((−1)^α V + C) t_i)`.
#[derive(Clone, Debug)]
pub struct Coupling<R: Real> {
    basis: Option<Arc<HermitianSpectrum<R>>>,
    v: Vec<Ratio>,
    c: Vec<Ratio>,
}

impl<R: Real> Coupling<R> {
    /// Dispersive coupling `H = −χ|1⟩⟨1| ⊗ n̂`, i.e. `V = χn̂/2`, `C = −χn̂/2`
    /// with `κ = χN/2`: `U_0 = I` and `U_1 = e^{iχn̂t}`.
    pub fn dispersive(modulus: u64, dim: FockDim) -> Self {
        let v: Vec<Ratio> = (0..dim.get())
            .map(|n| Ratio::Exact { num: n as i64, den: modulus })
            .collect();
        let c = v.iter().map(|r| r.neg()).collect();
        Coupling { basis: None, v, c }
    }

    /// Symmetric coupling `σ_z ⊗ √2 g X` measured with the given period.
    pub fn quadrature(axis: Axis, period: f64, dim: FockDim) -> Result<Self> {
        let x = quadrature::<R>(R::lit(axis.theta()), dim);
        let spectrum = HermitianSpectrum::new(&x)?;
        Ok(Self::in_basis(Arc::new(spectrum), period))
    }

    /// Symmetric coupling in a precomputed eigenbasis with eigenvalue
    /// scale `period`.
    pub fn in_basis(spectrum: Arc<HermitianSpectrum<R>>, period: f64) -> Self {
        let v = spectrum
            .values()
            .iter()
            .map(|x| Ratio::Approx(x.to_f64_lossy() / period))
            .collect::<Vec<_>>();
        let c = vec![Ratio::Approx(0.0); v.len()];
        Coupling { basis: Some(spectrum), v, c }
    }

    /// Coupling diagonal in the Fock basis with arbitrary `v/κ` and `c/κ`.
    pub fn diagonal(v_over_kappa: &[f64], c_over_kappa: &[f64]) -> Result<Self> {
        if v_over_kappa.len() != c_over_kappa.len() {
            return Err(Error::DimensionMismatch { left: v_over_kappa.len(), right: c_over_kappa.len() });
        }
        FockDim::new(v_over_kappa.len())?;
        Ok(Coupling {
            basis: None,
            v: v_over_kappa.iter().map(|&x| Ratio::Approx(x)).collect(),
            c: c_over_kappa.iter().map(|&x| Ratio::Approx(x)).collect(),
        })
    }

    pub fn dim(&self) -> FockDim {
        FockDim::new(self.v.len()).expect("validated")
    }

    pub fn spectrum(&self) -> Option<&Arc<HermitianSpectrum<R>>> {
        self.basis.as_ref()
    }

    /// `v_j/κ` for each eigenvector.
    pub fn eigen_ratios(&self) -> Vec<f64> {
        self.v.iter().map(|r| r.value()).collect()
    }

    pub fn commuting_ratios(&self) -> Vec<f64> {
        self.c.iter().map(|r| r.value()).collect()
    }

    /// Diagonals of `U_0` and `U_1` for a window `t = 2^k π/κ`.
    fn unitaries(&self, k: u32) -> [Vec<C<R>>; 2] {
        let pi = R::pi();
        let make = |sign: bool| {
            self.v
                .iter()
                .zip(&self.c)
                .map(|(&v, &c)| {
                    let total = if sign { v.neg().add(c) } else { v.add(c) };
                    cis(-pi * R::lit(total.scaled_mod2(k)))
                })
                .collect()
        };
        [make(false), make(true)]
    }
}

/// The diagonal Kraus pair of a cell, `M_α = [U_0 − (−1)^α e^{iφ} U_1]/2`.
fn kraus_pair<R: Real>(u: &[Vec<C<R>>; 2], phi: f64) -> [Vec<C<R>>; 2] {
    let e = cis(R::lit(phi));
    let half = R::lit(0.5);
    let m0 = u[0].iter().zip(&u[1]).map(|(&a, &b)| (a - e * b) * half).collect();
    let m1 = u[0].iter().zip(&u[1]).map(|(&a, &b)| (a + e * b) * half).collect();
    [m0, m1]
}

/// Working copy of a state expressed in the coupling eigenbasis.
#[derive(Clone, Debug)]
pub(crate) enum Work<R: Real> {
    Pure(DVector<C<R>>),
    Mixed(DMatrix<C<R>>),
}

impl<R: Real> Work<R> {
    pub(crate) fn populations(&self) -> Vec<R> {
        match self {
            Work::Pure(v) => v.iter().map(|z| norm_sqr(*z)).collect(),
            Work::Mixed(m) => (0..m.nrows()).map(|i| m[(i, i)].re).collect(),
        }
    }

    pub(crate) fn apply_diag(&mut self, k: &[C<R>]) {
        match self {
            Work::Pure(v) => v.iter_mut().zip(k).for_each(|(z, m)| *z *= *m),
            Work::Mixed(rho) => {
                let n = rho.nrows();
                for j in 0..n {
                    let kj = k[j].conj();
                    for i in 0..n {
                        rho[(i, j)] *= k[i] * kj;
                    }
                }
            }
        }
    }

    pub(crate) fn scale(&mut self, p: R) {
        match self {
            Work::Pure(v) => *v *= cr(R::one() / p.sqrt()),
            Work::Mixed(m) => *m *= cr(R::one() / p),
        }
    }

    pub(crate) fn weight(&self, k: &[C<R>], pops: &[R]) -> R {
        k.iter().zip(pops).fold(R::zero(), |s, (m, p)| s + norm_sqr(*m) * *p)
    }
}

/// One sampled (or enumerated) run of the m-round sequence.
#[derive(Clone, Debug)]
pub struct Trajectory<R: Real> {
    /// `α_1 … α_m`.
    pub bits: Vec<u8>,
    /// `ϑ = 0.α_m…α_1`.
    pub theta: f64,
    pub probability: R,
    pub state: QuantumState<R>,
}

impl<R: Real> Trajectory<R> {
    pub fn outcome(&self) -> u64 {
        outcome_index(&self.bits)
    }
}

/// Phase-estimation engine for one schedule and truncation, with the
/// eigenbasis and cell unitaries computed once.
#[derive(Clone, Debug)]
pub struct QpeEngine<R: Real> {
    schedule: QpeSchedule,
    coupling: Coupling<R>,
    /// `[U_0, U_1]` diagonals per round.
    cells: Vec<[Vec<C<R>>; 2]>,
}

impl<R: Real> QpeEngine<R> {
    pub fn new(schedule: QpeSchedule, dim: FockDim) -> Result<Self> {
        let coupling = match schedule.kind() {
            ScheduleKind::Rotation { modulus, .. } => Coupling::dispersive(modulus, dim),
            ScheduleKind::Quadrature { axis, period, .. } => Coupling::quadrature(axis, period, dim)?,
            ScheduleKind::Custom { .. } => {
                return Err(Error::InvalidArgument("custom schedules need an explicit coupling".into()))
            }
        };
        Ok(Self::with_coupling(schedule, coupling))
    }

    pub fn with_coupling(schedule: QpeSchedule, coupling: Coupling<R>) -> Self {
        let m = schedule.rounds();
        let cells = (1..=m).map(|i| coupling.unitaries((m - i) as u32)).collect();
        QpeEngine { schedule, coupling, cells }
    }

    pub fn schedule(&self) -> &QpeSchedule {
        &self.schedule
    }

    pub fn coupling(&self) -> &Coupling<R> {
        &self.coupling
    }

    pub fn dim(&self) -> FockDim {
        self.coupling.dim()
    }

    /// Kraus pair of round `i` (1-based) under feedback phase `phi`, as
    /// diagonals in the coupling eigenbasis.
    pub fn kraus_diagonals(&self, i: usize, phi: f64) -> [Vec<C<R>>; 2] {
        kraus_pair(&self.cells[i - 1], phi)
    }

    /// Dense Kraus pair of round `i` in the Fock basis.
    pub fn kraus_operators(&self, i: usize, phi: f64) -> [OperatorMatrix<R>; 2] {
        let [m0, m1] = self.kraus_diagonals(i, phi);
        let dense = |k: Vec<C<R>>| {
            let d = OperatorMatrix::from_diagonal(&k).expect("dim validated");
            match &self.coupling.basis {
                None => d,
                Some(s) => {
                    let w = s.vectors();
                    OperatorMatrix::from_matrix_unchecked(w * d.matrix() * w.adjoint())
                }
            }
        };
        [dense(m0), dense(m1)]
    }

    pub(crate) fn to_work(&self, state: &QuantumState<R>) -> Result<Work<R>> {
        self.dim().check(state.dim())?;
        Ok(match (&self.coupling.basis, state.as_pure()) {
            (None, Some(v)) => Work::Pure(v.clone()),
            (None, None) => Work::Mixed(state.as_density().unwrap().clone()),
            (Some(s), Some(v)) => Work::Pure(s.vectors().ad_mul(v)),
            (Some(s), None) => {
                let w = s.vectors();
                Work::Mixed(w.ad_mul(state.as_density().unwrap()) * w)
            }
        })
    }

    pub(crate) fn from_work(&self, work: Work<R>) -> QuantumState<R> {
        match (&self.coupling.basis, work) {
            (None, Work::Pure(v)) => QuantumState::pure_unchecked(v),
            (None, Work::Mixed(m)) => QuantumState::density_unchecked(m),
            (Some(s), Work::Pure(v)) => QuantumState::pure_unchecked(s.vectors() * v),
            (Some(s), Work::Mixed(m)) => {
                let w = s.vectors();
                QuantumState::density_unchecked(w * m * w.adjoint())
            }
        }
    }

    /// Samples one trajectory. Each cell consumes exactly one uniform draw.
    pub fn run<G: Rng + ?Sized>(&self, state: &QuantumState<R>, rng: &mut G) -> Result<Trajectory<R>> {
        let mut work = self.to_work(state)?;
        let mut reg = FeedbackRegister::new();
        let mut probability = R::one();
        for i in 1..=self.schedule.rounds() {
            let kraus = self.kraus_diagonals(i, reg.phase());
            let pops = work.populations();
            let p = [work.weight(&kraus[0], &pops), work.weight(&kraus[1], &pops)];
            let u: f64 = rng.random();
            let alpha = pick(p, u);
            work.apply_diag(&kraus[alpha]);
            work.scale(p[alpha]);
            probability *= p[alpha];
            reg.push(alpha as u8);
        }
        let bits = reg.bits().to_vec();
        Ok(Trajectory {
            theta: theta_of(&bits),
            bits,
            probability,
            state: self.from_work(work),
        })
    }

    /// Samples only the outcome, tracking eigenbasis populations. Consumes the
    /// same draws as [`QpeEngine::run`], so the bits agree for a given stream.
    pub fn sample_outcome<G: Rng + ?Sized>(&self, populations: &[R], rng: &mut G) -> Vec<u8> {
        let mut pops = populations.to_vec();
        let mut reg = FeedbackRegister::new();
        for i in 1..=self.schedule.rounds() {
            let kraus = self.kraus_diagonals(i, reg.phase());
            let p = [weight(&kraus[0], &pops), weight(&kraus[1], &pops)];
            let u: f64 = rng.random();
            let alpha = pick(p, u);
            for (w, m) in pops.iter_mut().zip(&kraus[alpha]) {
                *w = *w * norm_sqr(*m) / p[alpha];
            }
            reg.push(alpha as u8);
        }
        reg.bits().to_vec()
    }

    /// Populations of a state in the coupling eigenbasis.
    pub fn eigen_populations(&self, state: &QuantumState<R>) -> Result<Vec<R>> {
        Ok(self.to_work(state)?.populations())
    }

    /// `M_{α_m} ⋯ M_{α_1}` applied to the state, renormalized. Returns the
    /// branch probability and `None` if some cell has probability below
    /// [`PRUNE`].
    pub fn superoperator(&self, state: &QuantumState<R>, bits: &[u8]) -> Result<(R, Option<QuantumState<R>>)> {
        self.check_bits(bits)?;
        let mut work = self.to_work(state)?;
        let mut reg = FeedbackRegister::new();
        let mut probability = R::one();
        for (k, &b) in bits.iter().enumerate() {
            let kraus = self.kraus_diagonals(k + 1, reg.phase());
            let pops = work.populations();
            let p = work.weight(&kraus[b as usize], &pops);
            if p.to_f64_lossy() < PRUNE {
                return Ok((R::zero(), None));
            }
            work.apply_diag(&kraus[b as usize]);
            work.scale(p);
            probability *= p;
            reg.push(b);
        }
        Ok((probability, Some(self.from_work(work))))
    }

    /// Unnormalized `M_ϑ(ρ)` in the Fock basis, with no pruning.
    pub fn superoperator_unnormalized(&self, state: &QuantumState<R>, bits: &[u8]) -> Result<DMatrix<C<R>>> {
        self.check_bits(bits)?;
        let mut work = match self.to_work(state)? {
            Work::Pure(v) => Work::Mixed(&v * v.adjoint()),
            w => w,
        };
        let mut reg = FeedbackRegister::new();
        for (k, &b) in bits.iter().enumerate() {
            let kraus = self.kraus_diagonals(k + 1, reg.phase());
            work.apply_diag(&kraus[b as usize]);
            reg.push(b);
        }
        Ok(self.from_work(work).density_matrix())
    }

    /// One cell of round `i` under feedback phase `phi`: both branch
    /// probabilities and normalized conditional states.
    pub fn cell(&self, state: &QuantumState<R>, i: usize, phi: f64) -> Result<[(R, Option<QuantumState<R>>); 2]> {
        let work = self.to_work(state)?;
        let kraus = self.kraus_diagonals(i, phi);
        let pops = work.populations();
        let branch = |alpha: usize| {
            let p = work.weight(&kraus[alpha], &pops);
            if p.to_f64_lossy() < PRUNE {
                return (p, None);
            }
            let mut w = work.clone();
            w.apply_diag(&kraus[alpha]);
            w.scale(p);
            (p, Some(self.from_work(w)))
        };
        Ok([branch(0), branch(1)])
    }

    /// Signs of `sin(2^m πξ_j) / sin(πξ_j)` with `ξ_j = ϑ − v_j/κ`: the
    /// outcome-dependent ±1 pattern the cells imprint on the eigenbasis.
    pub fn frame_signs(&self, theta: f64) -> Vec<f64> {
        let m = self.schedule.rounds();
        self.coupling
            .eigen_ratios()
            .into_iter()
            .map(|v| if signed_kernel_amplitude(m, theta - v) < 0.0 { -1.0 } else { 1.0 })
            .collect()
    }

    /// Undoes the sign pattern of [`QpeEngine::frame_signs`] on a conditional
    /// state.
    pub fn frame_correct(&self, state: &QuantumState<R>, theta: f64) -> Result<QuantumState<R>> {
        let mut work = self.to_work(state)?;
        let signs: Vec<C<R>> = self.frame_signs(theta).into_iter().map(|s| cr(R::lit(s))).collect();
        work.apply_diag(&signs);
        Ok(self.from_work(work))
    }

    fn check_bits(&self, bits: &[u8]) -> Result<()> {
        if bits.len() != self.schedule.rounds() || bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument(format!(
                "expected {} outcome bits in {{0, 1}}",
                self.schedule.rounds()
            )));
        }
        Ok(())
    }

    /// Visits every reachable trajectory depth-first and maps it through
    /// `f`. Results come back in outcome-index order.
    pub fn map_branches<T, F>(&self, state: &QuantumState<R>, f: F) -> Result<Vec<(u64, T)>>
    where
        T: Send,
        F: Fn(Trajectory<R>) -> T + Sync,
    {
        let work = self.to_work(state)?;
        let mut out = self.descend(work, FeedbackRegister::new(), R::one(), &f);
        out.sort_by_key(|(j, _)| *j);
        Ok(out)
    }

    fn descend<T, F>(&self, work: Work<R>, reg: FeedbackRegister, probability: R, f: &F) -> Vec<(u64, T)>
    where
        T: Send,
        F: Fn(Trajectory<R>) -> T + Sync,
    {
        let depth = reg.bits().len();
        if depth == self.schedule.rounds() {
            let bits = reg.bits().to_vec();
            let j = outcome_index(&bits);
            let traj = Trajectory { theta: theta_of(&bits), bits, probability, state: self.from_work(work) };
            return vec![(j, f(traj))];
        }
        let kraus = self.kraus_diagonals(depth + 1, reg.phase());
        let pops = work.populations();
        let child = |alpha: usize| -> Vec<(u64, T)> {
            let p = work.weight(&kraus[alpha], &pops);
            if p.to_f64_lossy() < PRUNE {
                return Vec::new();
            }
            let mut w = work.clone();
            w.apply_diag(&kraus[alpha]);
            w.scale(p);
            let mut r = reg.clone();
            r.push(alpha as u8);
            self.descend(w, r, probability * p, f)
        };
        let (mut a, b) = if depth < 4 { rayon::join(|| child(0), || child(1)) } else { (child(0), child(1)) };
        a.extend(b);
        a
    }

    /// Every reachable trajectory with its conditional state.
    pub fn enumerate(&self, state: &QuantumState<R>) -> Result<Vec<Trajectory<R>>> {
        Ok(self.map_branches(state, |t| t)?.into_iter().map(|(_, t)| t).collect())
    }

    /// Probabilities of all `2^m` outcomes by exhaustive enumeration of the
    /// trajectory tree.
    pub fn branch_probabilities(&self, state: &QuantumState<R>) -> Result<Vec<R>> {
        let mut p = vec![R::zero(); self.schedule.outcomes() as usize];
        for (j, prob) in self.map_branches(state, |t| t.probability)? {
            p[j as usize] = prob;
        }
        Ok(p)
    }
}

fn weight<R: Real>(k: &[C<R>], pops: &[R]) -> R {
    k.iter().zip(pops).fold(R::zero(), |s, (m, p)| s + norm_sqr(*m) * *p)
}

fn pick<R: Real>(p: [R; 2], u: f64) -> usize {
    let (p0, p1) = (p[0].to_f64_lossy(), p[1].to_f64_lossy());
    if p0 < PRUNE {
        1
    } else if p1 < PRUNE {
        0
    } else if u * (p0 + p1) < p0 {
        0
    } else {
        1
    }
}

/// Result of one Ramsey cell: both branches with their probabilities.
#[derive(Clone, Debug)]
pub struct CellOutcome<R: Real> {
    pub p0: R,
    pub p1: R,
    /// `None` when the branch probability is below [`PRUNE`].
    pub state0: Option<QuantumState<R>>,
    pub state1: Option<QuantumState<R>>,
}

/// One Ramsey cell with arbitrary unitaries: `M_α = [U_0 − (−1)^α e^{iφ} U_1]/2`.
pub fn rim_cell<R: Real>(
    state: &QuantumState<R>,
    u0: &OperatorMatrix<R>,
    u1: &OperatorMatrix<R>,
    phi: f64,
) -> Result<CellOutcome<R>> {
    let [m0, m1] = rim_kraus(u0, u1, phi)?;
    state.dim().check(u0.dim())?;
    let branch = |m: &OperatorMatrix<R>| -> Result<(R, Option<QuantumState<R>>)> {
        let mut s = state.transform(m)?;
        let p = s.trace();
        if p.to_f64_lossy() < PRUNE {
            return Ok((p.max(R::zero()), None));
        }
        s.normalize_in_place();
        Ok((p, Some(s)))
    };
    let (p0, state0) = branch(&m0)?;
    let (p1, state1) = branch(&m1)?;
    Ok(CellOutcome { p0, p1, state0, state1 })
}

/// Dense Kraus pair of a cell; both unitaries are checked.
pub fn rim_kraus<R: Real>(u0: &OperatorMatrix<R>, u1: &OperatorMatrix<R>, phi: f64) -> Result<[OperatorMatrix<R>; 2]> {
    u0.dim().check(u1.dim())?;
    for u in [u0, u1] {
        let defect = u.unitarity_defect();
        if defect > R::lit(R::UNITARY_TOL) {
            return Err(Error::NotUnitary { deviation: defect.to_f64_lossy() });
        }
    }
    let e = cis(R::lit(phi));
    let half = cr(R::lit(0.5));
    let m0 = (u0.matrix() - u1.matrix() * e) * half;
    let m1 = (u0.matrix() + u1.matrix() * e) * half;
    Ok([OperatorMatrix::from_matrix_unchecked(m0), OperatorMatrix::from_matrix_unchecked(m1)])
}

pub fn run_trajectory<R: Real, G: Rng + ?Sized>(
    state: &QuantumState<R>,
    schedule: &QpeSchedule,
    rng: &mut G,
) -> Result<Trajectory<R>> {
    QpeEngine::new(*schedule, state.dim())?.run(state, rng)
}

pub fn trajectory_superoperator<R: Real>(
    state: &QuantumState<R>,
    schedule: &QpeSchedule,
    bits: &[u8],
) -> Result<(R, Option<QuantumState<R>>)> {
    QpeEngine::new(*schedule, state.dim())?.superoperator(state, bits)
}

/// `sin(2^m πξ) / (2^m sin πξ)` through its sign and magnitude:
/// `(−1)^{⌊ξ⌋ + ⌊2^m ξ⌋} √F_{2^m}(ξ)`.
pub(crate) fn signed_kernel_amplitude(rounds: usize, xi: f64) -> f64 {
    let n = 2f64.powi(rounds as i32);
    let parity = (xi.floor() as i64 + (n * xi).floor() as i64).rem_euclid(2);
    let sign = if parity == 0 { 1.0 } else { -1.0 };
    sign * super::fejer_kernel::<f64>(1u64 << rounds, xi).sqrt()
}

/// Closed-form `M_ϑ(ρ)` for a coupling diagonal in the Fock basis:
/// `Σ_{k,l} (−1)^{b_kl} √(F(ξ_k)F(ξ_l)) e^{−iπ(c_k−c_l)(2^m−1)/κ} Π_k ρ Π_l`
/// with `ξ = ϑ − v/κ`. The result carries the same normalization as the
/// sequential product up to a phase common to the whole branch.
pub fn closed_form_superoperator<R: Real>(
    state: &QuantumState<R>,
    coupling: &Coupling<R>,
    rounds: usize,
    bits: &[u8],
) -> Result<DMatrix<C<R>>> {
    if coupling.basis.is_some() {
        return Err(Error::InvalidArgument("closed form needs a Fock-diagonal coupling".into()));
    }
    coupling.dim().check(state.dim())?;
    if bits.len() != rounds {
        return Err(Error::InvalidArgument(format!("expected {rounds} bits")));
    }
    let theta = theta_of(bits);
    let cycles = 2f64.powi(rounds as i32) - 1.0;
    let amp: Vec<C<R>> = coupling
        .v
        .iter()
        .zip(&coupling.c)
        .map(|(v, c)| {
            let a = signed_kernel_amplitude(rounds, theta - v.value());
            let phase = -std::f64::consts::PI * c.value() * cycles;
            C::new(R::lit(a * phase.cos()), R::lit(a * phase.sin()))
        })
        .collect();
    let rho = state.density_matrix();
    let n = rho.nrows();
    Ok(DMatrix::from_fn(n, n, |i, j| amp[i] * rho[(i, j)] * amp[j].conj()))
}
