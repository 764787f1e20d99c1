//! Code words and primitive states: coherent, cat, binomial, squeezed
//! vacuum and finite-energy square-lattice GKP.

use nalgebra::DVector;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{envelope, position_eigenvector, FockDim, QuantumState};
use crate::scalar::{cr, Real, C};

/// Weight a constructor may leave beyond the truncation.
const LEAK_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "family")]
pub enum RotationFamily {
    Cat { alpha: f64 },
    Binomial { k: usize },
}

/// An N-fold rotation-symmetric code word `|μ⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationCodeSpec {
    pub n: usize,
    pub family: RotationFamily,
    pub mu: u8,
    pub dim: FockDim,
}

impl RotationCodeSpec {
    pub fn new(n: usize, family: RotationFamily, mu: u8, dim: FockDim) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("symmetry order N must be positive".into()));
        }
        if mu > 1 {
            return Err(Error::InvalidArgument(format!("logical index must be 0 or 1, got {mu}")));
        }
        match family {
            RotationFamily::Binomial { k } => {
                if k == 0 {
                    return Err(Error::InvalidArgument("binomial K must be positive".into()));
                }
                if dim.get() <= k * n {
                    return Err(Error::InsufficientDimension { dim: dim.get(), leaked: 1.0 });
                }
            }
            RotationFamily::Cat { alpha } => {
                if !alpha.is_finite() {
                    return Err(Error::Numeric("cat amplitude"));
                }
            }
        }
        Ok(RotationCodeSpec { n, family, mu, dim })
    }

    pub fn cat(n: usize, alpha: f64, mu: u8, dim: FockDim) -> Result<Self> {
        Self::new(n, RotationFamily::Cat { alpha }, mu, dim)
    }

    pub fn binomial(n: usize, k: usize, mu: u8, dim: FockDim) -> Result<Self> {
        Self::new(n, RotationFamily::Binomial { k }, mu, dim)
    }

    pub fn with_mu(self, mu: u8) -> Result<Self> {
        Self::new(self.n, self.family, mu, self.dim)
    }
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

fn binomial_coeff(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)).exp().round()
}

/// `|α⟩`, built in log space so large amplitudes and dims don't overflow.
pub fn coherent_state<R: Real>(alpha: C<R>, dim: FockDim) -> Result<QuantumState<R>> {
    let a = Complex::new(alpha.re.to_f64_lossy(), alpha.im.to_f64_lossy());
    let amps = coherent_amplitudes(a, dim.get());
    check_leak(&amps)?;
    QuantumState::pure(to_vector(&amps))
}

/// Rejects a truncated normalized expansion that lost more than `LEAK_TOL`.
fn check_leak(amps: &[Complex<f64>]) -> Result<()> {
    let kept: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    let leaked = (1.0 - kept).max(0.0);
    if leaked > LEAK_TOL {
        return Err(Error::InsufficientDimension { dim: amps.len(), leaked });
    }
    Ok(())
}

fn coherent_amplitudes(alpha: Complex<f64>, d: usize) -> Vec<Complex<f64>> {
    let r = alpha.norm();
    let phase = alpha.arg();
    let mut out = Vec::with_capacity(d);
    let mut ln_fact = 0.0;
    for n in 0..d {
        if n > 0 {
            ln_fact += (n as f64).ln();
        }
        let mag = if r == 0.0 {
            if n == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            (-0.5 * r * r + n as f64 * r.ln() - 0.5 * ln_fact).exp()
        };
        out.push(Complex::from_polar(mag, n as f64 * phase));
    }
    out
}

fn to_vector<R: Real>(v: &[Complex<f64>]) -> DVector<C<R>> {
    DVector::from_iterator(v.len(), v.iter().map(|z| Complex::new(R::lit(z.re), R::lit(z.im))))
}

/// `Σ_{m<2N} (−1)^{μm} |e^{imπ/N} α⟩`, normalized.
pub fn cat_state<R: Real>(spec: &RotationCodeSpec) -> Result<QuantumState<R>> {
    let RotationFamily::Cat { alpha } = spec.family else {
        return Err(Error::InvalidArgument("cat_state needs a cat spec".into()));
    };
    let d = spec.dim.get();
    check_leak(&coherent_amplitudes(Complex::new(alpha, 0.0), d))?;
    let mut acc = vec![Complex::new(0.0, 0.0); d];
    let two_n = 2 * spec.n;
    for m in 0..two_n {
        let sign = if spec.mu == 1 && m % 2 == 1 { -1.0 } else { 1.0 };
        let rot = Complex::from_polar(alpha, m as f64 * std::f64::consts::PI / spec.n as f64);
        for (slot, z) in acc.iter_mut().zip(coherent_amplitudes(rot, d)) {
            *slot += z * sign;
        }
    }
    QuantumState::pure(to_vector(&acc))
}

/// `Σ_{j ≡ μ (2), j ≤ K} √(2^{1−K} C(K, j)) |jN⟩`.
pub fn binomial_state<R: Real>(spec: &RotationCodeSpec) -> Result<QuantumState<R>> {
    let RotationFamily::Binomial { k } = spec.family else {
        return Err(Error::InvalidArgument("binomial_state needs a binomial spec".into()));
    };
    let mut v = vec![Complex::new(0.0, 0.0); spec.dim.get()];
    let norm = 2f64.powi(1 - k as i32);
    for j in (spec.mu as usize..=k).step_by(2) {
        v[j * spec.n] = Complex::new((norm * binomial_coeff(k, j)).sqrt(), 0.0);
    }
    QuantumState::pure(to_vector(&v))
}

pub fn code_state<R: Real>(spec: &RotationCodeSpec) -> Result<QuantumState<R>> {
    match spec.family {
        RotationFamily::Cat { .. } => cat_state(spec),
        RotationFamily::Binomial { .. } => binomial_state(spec),
    }
}

/// `(|0⟩ + |1⟩)/√2` of a rotation code.
pub fn code_plus_state<R: Real>(spec: &RotationCodeSpec) -> Result<QuantumState<R>> {
    let zero = code_state::<R>(&spec.with_mu(0)?)?;
    let one = code_state::<R>(&spec.with_mu(1)?)?;
    let (z, o) = (zero.as_pure().unwrap(), one.as_pure().unwrap());
    QuantumState::pure(z + o)
}

/// Preparation primitive for the binomial code:
/// `Σ_{n ≤ KN} √(2^{1−K} C(K, ⌊n/N⌋)) |n⟩`, normalized.
pub fn binomial_primitive<R: Real>(n: usize, k: usize, dim: FockDim) -> Result<QuantumState<R>> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidArgument("N and K must be positive".into()));
    }
    if dim.get() <= k * n {
        return Err(Error::InsufficientDimension { dim: dim.get(), leaked: 1.0 });
    }
    let norm = 2f64.powi(1 - k as i32);
    let mut v = vec![Complex::new(0.0, 0.0); dim.get()];
    for (level, slot) in v.iter_mut().enumerate().take(k * n + 1) {
        *slot = Complex::new((norm * binomial_coeff(k, level / n)).sqrt(), 0.0);
    }
    QuantumState::pure(to_vector(&v))
}

/// `S(r)|0⟩` with `S(r) = exp(r(a² − a†²)/2)`.
///
/// With this sign `Var(Q) = e^{−2r}/2`: positive `r` squeezes position and
/// negative `r` squeezes momentum.
pub fn squeezed_vacuum<R: Real>(r: R, dim: FockDim) -> Result<QuantumState<R>> {
    let r = r.to_f64_lossy();
    if !r.is_finite() || r.abs() > 3.0 {
        return Err(Error::InvalidArgument(format!("squeezing |r| must be at most 3, got {r}")));
    }
    let d = dim.get();
    let t = r.tanh();
    let ln_pref = -0.5 * r.cosh().ln();
    let mut v = vec![Complex::new(0.0, 0.0); d];
    let mut kept = 0.0;
    for n in 0..(d + 1) / 2 {
        // c_{2n} = (−tanh r)^n √((2n)!) / (2^n n! √cosh r)
        let mag = if n == 0 {
            ln_pref.exp()
        } else if t == 0.0 {
            0.0
        } else {
            (ln_pref + n as f64 * t.abs().ln() + 0.5 * ln_factorial(2 * n)
                - n as f64 * 2f64.ln()
                - ln_factorial(n))
            .exp()
        };
        let sign = if t > 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
        v[2 * n] = Complex::new(sign * mag, 0.0);
        kept += mag * mag;
    }
    let leaked = (1.0 - kept).max(0.0);
    if leaked > LEAK_TOL {
        return Err(Error::InsufficientDimension { dim: d, leaked });
    }
    QuantumState::pure(to_vector(&v))
}

/// Finite-energy square-lattice GKP code word.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GkpSpec {
    pub delta: f64,
    pub mu: u8,
    /// Comb peaks kept on each side of the origin.
    pub k_range: usize,
    pub dim: FockDim,
}

impl GkpSpec {
    pub fn new(delta: f64, mu: u8, dim: FockDim) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidArgument(format!("GKP Δ must be positive, got {delta}")));
        }
        if mu > 1 {
            return Err(Error::InvalidArgument(format!("logical index must be 0 or 1, got {mu}")));
        }
        Ok(GkpSpec {
            delta,
            mu,
            k_range: Self::default_k_range(delta),
            dim,
        })
    }

    /// Fewest peaks satisfying both `k ≥ 4/(√π Δ)` and an envelope weight
    /// `e^{−πΔ²(2k)²}` below 1e−8 at the outermost peak.
    pub fn default_k_range(delta: f64) -> usize {
        let comb = (4.0 / (std::f64::consts::PI.sqrt() * delta)).ceil() as usize;
        let env = ((1e8f64).ln() / (4.0 * std::f64::consts::PI * delta * delta)).sqrt().ceil() as usize;
        comb.max(env).max(1)
    }

    pub fn with_k_range(mut self, k_range: usize) -> Result<Self> {
        let min = (4.0 / (std::f64::consts::PI.sqrt() * self.delta)).ceil() as usize;
        if k_range < min {
            return Err(Error::InvalidArgument(format!(
                "k_range {k_range} below the minimum {min} for Δ = {}",
                self.delta
            )));
        }
        self.k_range = k_range;
        Ok(self)
    }
}

/// Squeezing in dB associated with an envelope parameter, `10 log₁₀(1/Δ²)`.
pub fn squeezing_db(delta: f64) -> f64 {
    10.0 * (1.0 / (delta * delta)).log10()
}

/// `e^{−Δ² n̂} Σ_{|k| ≤ K} |q = (2k+μ)√π⟩`, normalized.
pub fn gkp_state<R: Real>(spec: &GkpSpec) -> Result<QuantumState<R>> {
    let d = spec.dim;
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let mut comb = DVector::<f64>::zeros(d.get());
    let k = spec.k_range as i64;
    for j in -k..=k {
        let q = (2 * j + spec.mu as i64) as f64 * sqrt_pi;
        comb += position_eigenvector::<f64>(q, d);
    }
    let env = envelope::<f64>(spec.delta, d);
    let v = env.apply(&comb.map(cr)).expect("same dim");
    let state = QuantumState::pure(v)?;
    let edge: f64 = state.populations()[d.interior()..].iter().sum();
    if edge > LEAK_TOL {
        return Err(Error::InsufficientDimension { dim: d.get(), leaked: edge });
    }
    Ok(state.cast())
}
