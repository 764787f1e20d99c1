use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar the simulator is generic over (`f32` or `f64`).
///
/// The tolerance constants scale the numerical guards to the precision of
/// the type: the `f64` values are the nominal ones, the `f32` values are
/// loose enough that single-precision runs don't trip them on round-off.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {
    /// Normalization / Hermiticity / trace tolerance for state validation.
    const STATE_TOL: f64;
    /// Tolerance for unitarity checks.
    const UNITARY_TOL: f64;
    /// Smallest eigenvalue allowed in a valid density matrix.
    const PSD_TOL: f64;

    fn lit(x: f64) -> Self;
    fn to_f64_lossy(self) -> f64;
}

impl Real for f64 {
    const STATE_TOL: f64 = 1e-10;
    const UNITARY_TOL: f64 = 1e-9;
    const PSD_TOL: f64 = 1e-9;

    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

impl Real for f32 {
    const STATE_TOL: f64 = 1e-4;
    const UNITARY_TOL: f64 = 1e-4;
    const PSD_TOL: f64 = 1e-4;

    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

pub type C<R> = Complex<R>;

#[inline]
pub(crate) fn c<R: Real>(re: f64, im: f64) -> Complex<R> {
    Complex::new(R::lit(re), R::lit(im))
}

#[inline]
pub(crate) fn cr<R: Real>(re: R) -> Complex<R> {
    Complex::new(re, R::zero())
}

/// e^{iθ} for a real angle.
#[inline]
pub(crate) fn cis<R: Real>(theta: R) -> Complex<R> {
    Complex::new(theta.cos(), theta.sin())
}

#[inline]
pub(crate) fn norm_sqr<R: Real>(z: Complex<R>) -> R {
    z.re * z.re + z.im * z.im
}

/// Largest modulus among complex entries.
pub(crate) fn max_abs<'a, R: Real>(it: impl IntoIterator<Item = &'a C<R>>) -> R {
    it.into_iter().fold(R::zero(), |m, z| m.max(cabs(*z)))
}

#[inline]
pub(crate) fn cabs<R: Real>(z: C<R>) -> R {
    norm_sqr(z).sqrt()
}

#[inline]
pub(crate) fn cexp<R: Real>(z: C<R>) -> C<R> {
    cis(z.im) * z.re.exp()
}
