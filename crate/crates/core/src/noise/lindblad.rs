use nalgebra::{DMatrix, Matrix2};

use super::HardwareParams;
use crate::error::{Error, Result};
use crate::fock::{FockDim, OperatorMatrix, QuantumState};
use crate::scalar::{cabs, cis, cr, max_abs, Real, C};

/// Operator in coordinate form. Composite operators on ancilla ⊗ mode use
/// the index `q·dim + n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator<R: Real> {
    n: usize,
    entries: Vec<(usize, usize, C<R>)>,
}

impl<R: Real> SparseOperator<R> {
    pub fn from_triplets(n: usize, entries: Vec<(usize, usize, C<R>)>) -> Result<Self> {
        if let Some(&(r, c, _)) = entries.iter().find(|(r, c, _)| *r >= n || *c >= n) {
            return Err(Error::InvalidArgument(format!("entry ({r}, {c}) outside a {n}x{n} operator")));
        }
        Ok(Self::merged(n, entries))
    }

    fn merged(n: usize, mut entries: Vec<(usize, usize, C<R>)>) -> Self {
        entries.sort_by_key(|&(r, c, _)| (c, r));
        let mut out: Vec<(usize, usize, C<R>)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match out.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => out.push((r, c, v)),
            }
        }
        out.retain(|&(_, _, v)| v.re != R::zero() || v.im != R::zero());
        SparseOperator { n, entries: out }
    }

    pub fn from_dense(m: &DMatrix<C<R>>) -> Self {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v.re != R::zero() || v.im != R::zero() {
                    entries.push((i, j, v));
                }
            }
        }
        SparseOperator { n: m.nrows(), entries }
    }

    /// `q ⊗ m` with the ancilla as the slow index.
    pub fn kron(qubit: &Matrix2<C<R>>, mode: &OperatorMatrix<R>) -> Self {
        let d = mode.dim().get();
        let mm = mode.matrix();
        let mut entries = Vec::new();
        for a in 0..2 {
            for b in 0..2 {
                let q = qubit[(a, b)];
                if q.re == R::zero() && q.im == R::zero() {
                    continue;
                }
                for j in 0..d {
                    for i in 0..d {
                        let v = mm[(i, j)];
                        if v.re != R::zero() || v.im != R::zero() {
                            entries.push((a * d + i, b * d + j, q * v));
                        }
                    }
                }
            }
        }
        Self::merged(2 * d, entries)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(usize, usize, C<R>)] {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self::merged(self.n, self.entries.iter().map(|&(r, c, v)| (c, r, v.conj())).collect())
    }

    pub fn to_dense(&self) -> DMatrix<C<R>> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    pub fn is_diagonal(&self) -> bool {
        self.entries.iter().all(|&(r, c, _)| r == c)
    }

    pub fn diagonal(&self) -> Vec<C<R>> {
        let mut d = vec![C::new(R::zero(), R::zero()); self.n];
        for &(r, c, v) in &self.entries {
            if r == c {
                d[r] += v;
            }
        }
        d
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> R {
        let mut rows = vec![R::zero(); self.n];
        for &(r, _, v) in &self.entries {
            rows[r] += cabs(v);
        }
        rows.into_iter().fold(R::zero(), |a, b| a.max(b))
    }

    /// `L†L`, accumulated row by row of `L`.
    fn gram(&self) -> Self {
        let mut by_row: Vec<Vec<(usize, C<R>)>> = vec![Vec::new(); self.n];
        for &(r, c, v) in &self.entries {
            by_row[r].push((c, v));
        }
        let mut out = Vec::new();
        for row in by_row {
            for &(i, vi) in &row {
                for &(j, vj) in &row {
                    out.push((i, j, vi.conj() * vj));
                }
            }
        }
        Self::merged(self.n, out)
    }

    /// `out = self · m` on column-major storage.
    fn left_mul(&self, m: &[C<R>], out: &mut [C<R>]) {
        let n = self.n;
        out.iter_mut().for_each(|z| *z = C::new(R::zero(), R::zero()));
        for j in 0..n {
            let col = &m[j * n..(j + 1) * n];
            let dst = &mut out[j * n..(j + 1) * n];
            for &(r, c, v) in &self.entries {
                dst[r] += v * col[c];
            }
        }
    }

    /// `out = m · self†`.
    fn right_mul_adjoint(&self, m: &[C<R>], out: &mut [C<R>]) {
        let n = self.n;
        out.iter_mut().for_each(|z| *z = C::new(R::zero(), R::zero()));
        for &(r, c, v) in &self.entries {
            let vc = v.conj();
            for i in 0..n {
                let x = m[c * n + i];
                out[r * n + i] += vc * x;
            }
        }
    }
}

/// Density operator of the ancilla ⊗ mode system.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeState<R: Real> {
    matrix: DMatrix<C<R>>,
    dim: FockDim,
}

impl<R: Real> CompositeState<R> {
    pub fn new(matrix: DMatrix<C<R>>, dim: FockDim) -> Result<Self> {
        if matrix.nrows() != 2 * dim.get() || matrix.ncols() != 2 * dim.get() {
            return Err(Error::DimensionMismatch {
                left: 2 * dim.get(),
                right: matrix.nrows(),
            });
        }
        let s = CompositeState { matrix, dim };
        s.validate()?;
        Ok(s)
    }

    /// `ρ_q ⊗ ρ_mode`.
    pub fn product(qubit: &Matrix2<C<R>>, mode: &QuantumState<R>) -> Result<Self> {
        let tr = qubit[(0, 0)] + qubit[(1, 1)];
        if (tr.re - R::one()).abs() > R::lit(R::STATE_TOL) || cabs(qubit[(0, 1)] - qubit[(1, 0)].conj()) > R::lit(R::STATE_TOL) {
            return Err(Error::InvalidState("ancilla state must be a unit-trace Hermitian 2x2 matrix".into()));
        }
        Ok(Self::product_unchecked(qubit, mode))
    }

    pub(crate) fn product_unchecked(qubit: &Matrix2<C<R>>, mode: &QuantumState<R>) -> Self {
        let d = mode.dim().get();
        let rho = mode.density_matrix();
        let mut m = DMatrix::zeros(2 * d, 2 * d);
        for a in 0..2 {
            for b in 0..2 {
                let q = qubit[(a, b)];
                m.view_mut((a * d, b * d), (d, d)).copy_from(&(&rho * q));
            }
        }
        CompositeState { matrix: m, dim: mode.dim() }
    }

    pub fn matrix(&self) -> &DMatrix<C<R>> {
        &self.matrix
    }

    pub fn dim(&self) -> FockDim {
        self.dim
    }

    /// Mode block `⟨a|ρ|b⟩` for ancilla levels `a, b`.
    pub fn mode_block(&self, a: usize, b: usize) -> DMatrix<C<R>> {
        let d = self.dim.get();
        self.matrix.view((a * d, b * d), (d, d)).into_owned()
    }

    pub fn reduced_mode(&self) -> QuantumState<R> {
        QuantumState::density_unchecked(self.mode_block(0, 0) + self.mode_block(1, 1))
    }

    pub fn reduced_qubit(&self) -> Matrix2<C<R>> {
        Matrix2::from_fn(|a, b| self.mode_block(a, b).trace())
    }

    pub fn trace(&self) -> R {
        self.matrix.trace().re
    }

    pub fn min_eigenvalue(&self) -> R {
        let sym = (&self.matrix + self.matrix.adjoint()) * cr(R::lit(0.5));
        sym.symmetric_eigenvalues().iter().cloned().fold(R::max_value().unwrap(), |a, b| a.min(b))
    }

    pub fn validate(&self) -> Result<()> {
        let tol = R::lit(R::STATE_TOL);
        if max_abs((&self.matrix - self.matrix.adjoint()).iter()) > tol {
            return Err(Error::InvalidState("composite state is not Hermitian".into()));
        }
        if (self.trace() - R::one()).abs() > tol {
            return Err(Error::InvalidState("composite state trace differs from 1".into()));
        }
        if self.min_eigenvalue() < -R::lit(R::PSD_TOL) {
            return Err(Error::InvalidState("composite state has a negative eigenvalue".into()));
        }
        Ok(())
    }
}

/// `dρ/dt = −i[H, ρ] + Σ_k Γ_k (L_k ρ L_k† − ½{L_k†L_k, ρ})` on the
/// composite space, integrated with a fixed step (μs).
#[derive(Clone, Debug)]
pub struct LindbladModel<R: Real> {
    hamiltonian: SparseOperator<R>,
    jumps: Vec<Jump<R>>,
    step: R,
    dim: FockDim,
}

#[derive(Clone, Debug)]
struct Jump<R: Real> {
    op: SparseOperator<R>,
    gram: SparseOperator<R>,
    rate: R,
}

impl<R: Real> LindbladModel<R> {
    pub fn new(
        hamiltonian: SparseOperator<R>,
        jumps: Vec<(SparseOperator<R>, R)>,
        step: R,
        dim: FockDim,
    ) -> Result<Self> {
        let n = 2 * dim.get();
        if hamiltonian.dim() != n {
            return Err(Error::DimensionMismatch { left: n, right: hamiltonian.dim() });
        }
        let h = hamiltonian.to_dense();
        if max_abs((&h - h.adjoint()).iter()) > R::lit(R::UNITARY_TOL) * max_abs(h.iter()).max(R::one()) {
            return Err(Error::InvalidArgument("Hamiltonian is not Hermitian".into()));
        }
        if !(step > R::zero()) || !step.is_finite() {
            return Err(Error::InvalidArgument("integration step must be positive".into()));
        }
        let mut list = Vec::new();
        for (op, rate) in jumps {
            if op.dim() != n {
                return Err(Error::DimensionMismatch { left: n, right: op.dim() });
            }
            if rate < R::zero() || !rate.is_finite() {
                return Err(Error::InvalidArgument("decay rates must be non-negative".into()));
            }
            if rate > R::zero() {
                let gram = op.gram();
                list.push(Jump { op, gram, rate });
            }
        }
        Ok(LindbladModel { hamiltonian, jumps: list, step, dim })
    }

    pub fn dim(&self) -> FockDim {
        self.dim
    }

    pub fn step(&self) -> R {
        self.step
    }

    pub fn with_step(mut self, step: R) -> Result<Self> {
        if !(step > R::zero()) || !step.is_finite() {
            return Err(Error::InvalidArgument("integration step must be positive".into()));
        }
        self.step = step;
        Ok(self)
    }

    pub fn hamiltonian(&self) -> &SparseOperator<R> {
        &self.hamiltonian
    }

    pub fn rates(&self) -> Vec<R> {
        self.jumps.iter().map(|j| j.rate).collect()
    }

    pub fn is_noiseless(&self) -> bool {
        self.jumps.is_empty()
    }

    /// Removes every decay channel, keeping the Hamiltonian.
    pub fn without_noise(&self) -> Self {
        LindbladModel { jumps: Vec::new(), ..self.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HardwareCoupling {
    /// `H = −χ |1⟩⟨1| ⊗ n̂`.
    Dispersive,
    /// `H = g σ_z ⊗ (a e^{−iθ} + a† e^{iθ})`.
    Quadrature { theta: f64 },
}

pub fn default_hardware_model<R: Real>(kind: HardwareCoupling, dim: FockDim) -> LindbladModel<R> {
    hardware_model(kind, dim, &HardwareParams::default()).expect("default parameters are valid")
}

pub fn hardware_model<R: Real>(
    kind: HardwareCoupling,
    dim: FockDim,
    params: &HardwareParams,
) -> Result<LindbladModel<R>> {
    let d = dim.get();
    let (hamiltonian, coupling) = match kind {
        HardwareCoupling::Dispersive => {
            let chi = params.chi();
            let entries = (0..d)
                .map(|n| (d + n, d + n, cr(R::lit(-chi * n as f64))))
                .collect();
            (SparseOperator::from_triplets(2 * d, entries)?, chi)
        }
        HardwareCoupling::Quadrature { theta } => {
            let g = params.g();
            let x = crate::fock::quadrature::<R>(R::lit(theta), dim)
                .scale(cr(R::lit(g * std::f64::consts::SQRT_2)));
            let z = Matrix2::new(cr(R::one()), cr(R::zero()), cr(R::zero()), cr(-R::one()));
            (SparseOperator::kron(&z, &x), g)
        }
    };
    let lower = Matrix2::new(cr(R::zero()), cr(R::one()), cr(R::zero()), cr(R::zero()));
    let id2 = Matrix2::identity();
    let jumps = vec![
        (SparseOperator::kron(&lower, &OperatorMatrix::identity(dim)), R::lit(params.gamma1_per_us)),
        (SparseOperator::kron(&id2, &crate::fock::annihilation(dim)), R::lit(params.gamma2_per_us)),
    ];
    let step = match params.step_us {
        Some(s) => s,
        None => {
            let max_rate = params.gamma1_per_us.max(params.gamma2_per_us);
            let mut s = 0.01 / coupling;
            if max_rate > 0.0 {
                s = s.min(1.0 / (100.0 * max_rate));
            }
            s
        }
    };
    LindbladModel::new(hamiltonian, jumps, R::lit(step), dim)
}

/// Per-step trace drift treated as integrator failure.
const DRIFT_TOL: f64 = 1e-6;
/// Largest `h` times the generator bound, inside the RK4 stability region.
const STABILITY: f64 = 1.4;

struct Workspace<R: Real> {
    a: Vec<C<R>>,
    b: Vec<C<R>>,
    c: Vec<C<R>>,
}

impl<R: Real> Workspace<R> {
    fn new(len: usize) -> Self {
        let z = C::new(R::zero(), R::zero());
        Workspace { a: vec![z; len], b: vec![z; len], c: vec![z; len] }
    }
}

/// `out += coeff · D(ρ)`.
fn add_dissipator<R: Real>(jumps: &[Jump<R>], n: usize, rho: &[C<R>], out: &mut [C<R>], ws: &mut Workspace<R>) {
    let half = R::lit(0.5);
    for jump in jumps {
        jump.op.left_mul(rho, &mut ws.a);
        jump.op.right_mul_adjoint(&ws.a, &mut ws.b);
        jump.gram.left_mul(rho, &mut ws.c);
        for j in 0..n {
            for i in 0..n {
                let k = j * n + i;
                let anti = ws.c[k] + ws.c[i * n + j].conj();
                out[k] += (ws.b[k] - anti * half) * jump.rate;
            }
        }
    }
}

/// `out = −i[H, ρ] + D(ρ)` with `Hρ` formed once and `ρH = (Hρ)†`.
fn lab_rhs<R: Real>(model: &LindbladModel<R>, n: usize, rho: &[C<R>], out: &mut [C<R>], ws: &mut Workspace<R>) {
    model.hamiltonian.left_mul(rho, &mut ws.a);
    for j in 0..n {
        for i in 0..n {
            let comm = ws.a[j * n + i] - ws.a[i * n + j].conj();
            out[j * n + i] = C::new(comm.im, -comm.re);
        }
    }
    add_dissipator(&model.jumps, n, rho, out, ws);
}

/// `ρ_ij ↦ u_i ρ_ij ū_j`.
fn rotate<R: Real>(u: &[C<R>], n: usize, rho: &[C<R>], out: &mut [C<R>]) {
    for j in 0..n {
        let uj = u[j].conj();
        for i in 0..n {
            out[j * n + i] = u[i] * rho[j * n + i] * uj;
        }
    }
}

/// Dissipator in the interaction picture of a diagonal Hamiltonian:
/// `U(s)† D(U(s) ρ U(s)†) U(s)` with `U(s) = e^{−iHs}`.
fn interaction_rhs<R: Real>(
    model: &LindbladModel<R>,
    h: &[R],
    s: R,
    n: usize,
    rho: &[C<R>],
    out: &mut [C<R>],
    tmp: &mut Vec<C<R>>,
    tmp2: &mut Vec<C<R>>,
    ws: &mut Workspace<R>,
) {
    let u: Vec<C<R>> = h.iter().map(|&hi| cis(-hi * s)).collect();
    rotate(&u, n, rho, tmp);
    tmp2.iter_mut().for_each(|z| *z = C::new(R::zero(), R::zero()));
    add_dissipator(&model.jumps, n, tmp, tmp2, ws);
    let ubar: Vec<C<R>> = u.iter().map(|z| z.conj()).collect();
    rotate(&ubar, n, tmp2, out);
}

fn symmetrize<R: Real>(n: usize, rho: &mut [C<R>]) {
    let half = R::lit(0.5);
    for j in 0..n {
        for i in 0..=j {
            if i == j {
                rho[j * n + i] = C::new(rho[j * n + i].re, R::zero());
            } else {
                let v = (rho[j * n + i] + rho[i * n + j].conj()) * half;
                rho[j * n + i] = v;
                rho[i * n + j] = v.conj();
            }
        }
    }
}

fn trace<R: Real>(n: usize, rho: &[C<R>]) -> R {
    (0..n).fold(R::zero(), |t, i| t + rho[i * n + i].re)
}

/// Evolves the composite state for `t` μs under the model with fixed-step RK4.
///
/// A diagonal Hamiltonian (the dispersive coupling) is removed exactly by
/// working in its interaction picture, so the step only has to resolve the
/// slow dissipative dynamics; any other Hamiltonian is integrated in the lab
/// frame and the step must satisfy `h‖H‖ ≤ 1.4`.
pub fn lindblad_evolve<R: Real>(
    rho: &CompositeState<R>,
    model: &LindbladModel<R>,
    t: R,
) -> Result<CompositeState<R>> {
    rho.dim.check(model.dim)?;
    if t < R::zero() || !t.is_finite() {
        return Err(Error::InvalidArgument("evolution time must be non-negative".into()));
    }
    if t == R::zero() {
        return Ok(rho.clone());
    }
    let n = 2 * rho.dim.get();
    let steps = (t / model.step).ceil().to_usize().unwrap_or(1).max(1);
    let h = t / R::from_usize(steps).unwrap();
    let diagonal = model.hamiltonian.is_diagonal();
    // The interaction picture leaves only the dissipator to RK4.
    let mut stiffness: f64 = model.jumps.iter().map(|j| (j.rate * j.gram.norm_bound()).to_f64_lossy()).sum();
    if !diagonal {
        stiffness += model.hamiltonian.norm_bound().to_f64_lossy();
    }
    if h.to_f64_lossy() * stiffness > STABILITY {
        return Err(Error::Integrator {
            reason: format!(
                "step {:.3e} us is outside the RK4 stability region for a generator bound of {:.3e}",
                h.to_f64_lossy(),
                stiffness
            ),
            suggested_step: STABILITY / stiffness,
        });
    }
    let hdiag: Vec<R> = model.hamiltonian.diagonal().iter().map(|z| z.re).collect();

    let len = n * n;
    let zero = C::new(R::zero(), R::zero());
    let mut y: Vec<C<R>> = rho.matrix.as_slice().to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![zero; len], vec![zero; len], vec![zero; len], vec![zero; len]);
    let mut probe = vec![zero; len];
    let (mut tmp, mut tmp2) = (vec![zero; len], vec![zero; len]);
    let mut ws = Workspace::new(len);
    let half = R::lit(0.5);
    let sixth = R::one() / R::lit(6.0);

    let eval = |s: R, x: &[C<R>], out: &mut Vec<C<R>>, ws: &mut Workspace<R>, tmp: &mut Vec<C<R>>, tmp2: &mut Vec<C<R>>| {
        if diagonal {
            interaction_rhs(model, &hdiag, s, n, x, out, tmp, tmp2, ws);
        } else {
            lab_rhs(model, n, x, out, ws);
        }
    };

    for step in 0..steps {
        let s = h * R::from_usize(step).unwrap();
        let before = trace(n, &y);
        eval(s, &y, &mut k1, &mut ws, &mut tmp, &mut tmp2);
        for i in 0..len {
            probe[i] = y[i] + k1[i] * (h * half);
        }
        eval(s + h * half, &probe, &mut k2, &mut ws, &mut tmp, &mut tmp2);
        for i in 0..len {
            probe[i] = y[i] + k2[i] * (h * half);
        }
        eval(s + h * half, &probe, &mut k3, &mut ws, &mut tmp, &mut tmp2);
        for i in 0..len {
            probe[i] = y[i] + k3[i] * h;
        }
        eval(s + h, &probe, &mut k4, &mut ws, &mut tmp, &mut tmp2);
        for i in 0..len {
            y[i] += (k1[i] + (k2[i] + k3[i]) * R::lit(2.0) + k4[i]) * (h * sixth);
        }
        symmetrize(n, &mut y);
        let after = trace(n, &y);
        if !after.is_finite() || (after - before).abs().to_f64_lossy() > DRIFT_TOL {
            return Err(Error::Integrator {
                reason: format!(
                    "trace drifted by {:.3e} in one step",
                    (after - before).abs().to_f64_lossy()
                ),
                suggested_step: h.to_f64_lossy() / 4.0,
            });
        }
    }
    let mut out = DMatrix::from_column_slice(n, n, &y);
    if diagonal {
        let u: Vec<C<R>> = hdiag.iter().map(|&hi| cis(-hi * t)).collect();
        let mut rotated = vec![zero; len];
        rotate(&u, n, &y, &mut rotated);
        out = DMatrix::from_column_slice(n, n, &rotated);
    }
    Ok(CompositeState { matrix: out, dim: rho.dim })
}
