use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quadrature measured by a GKP cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    Q,
    P,
}

impl Axis {
    /// Angle θ of `X_θ = (a e^{−iθ} + a† e^{iθ})/√2`.
    pub fn theta(self) -> f64 {
        match self {
            Axis::Q => 0.0,
            Axis::P => std::f64::consts::FRAC_PI_2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScheduleKind {
    /// Dispersive coupling `−χ|1⟩⟨1| ⊗ n̂`, estimating `n/N mod 1`.
    Rotation { modulus: u64, chi: f64 },
    /// `g σ_z ⊗ √2 X`, estimating `x/period mod 1`.
    Quadrature { axis: Axis, g: f64, period: f64 },
    /// Any coupling with the given eigenvalue scale κ.
    Custom { kappa: f64 },
}

/// The free-evolution windows of an m-round phase-estimation sequence,
/// `t_i = 2^{m−i} π / κ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QpeSchedule {
    rounds: usize,
    kind: ScheduleKind,
}

/// Rounds beyond this would overflow the dyadic outcome index.
pub const MAX_ROUNDS: usize = 40;

impl QpeSchedule {
    pub fn new(rounds: usize, kind: ScheduleKind) -> Result<Self> {
        if rounds == 0 || rounds > MAX_ROUNDS {
            return Err(Error::InvalidArgument(format!("rounds must lie in 1..={MAX_ROUNDS}, got {rounds}")));
        }
        let positive = |x: f64, what: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{what} must be positive, got {x}")))
            }
        };
        match kind {
            ScheduleKind::Rotation { modulus, chi } => {
                if modulus == 0 {
                    return Err(Error::InvalidArgument("modulus must be positive".into()));
                }
                positive(chi, "χ")?;
            }
            ScheduleKind::Quadrature { g, period, .. } => {
                positive(g, "g")?;
                positive(period, "period")?;
            }
            ScheduleKind::Custom { kappa } => positive(kappa, "κ")?,
        }
        Ok(QpeSchedule { rounds, kind })
    }

    pub fn rotation(rounds: usize, modulus: u64, chi: f64) -> Result<Self> {
        Self::new(rounds, ScheduleKind::Rotation { modulus, chi })
    }

    /// Detection schedule for a square GKP lattice: period √π.
    pub fn quadrature(rounds: usize, axis: Axis, g: f64) -> Result<Self> {
        Self::new(rounds, ScheduleKind::Quadrature { axis, g, period: std::f64::consts::PI.sqrt() })
    }

    /// Preparation schedule for GKP code words: period 2√π.
    pub fn gkp_preparation(rounds: usize, axis: Axis, g: f64) -> Result<Self> {
        Self::new(rounds, ScheduleKind::Quadrature { axis, g, period: 2.0 * std::f64::consts::PI.sqrt() })
    }

    pub fn custom(rounds: usize, kappa: f64) -> Result<Self> {
        Self::new(rounds, ScheduleKind::Custom { kappa })
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn outcomes(&self) -> u64 {
        1u64 << self.rounds
    }

    pub fn kappa(&self) -> f64 {
        match self.kind {
            ScheduleKind::Rotation { modulus, chi } => chi * modulus as f64 / 2.0,
            ScheduleKind::Quadrature { g, period, .. } => std::f64::consts::SQRT_2 * g * period,
            ScheduleKind::Custom { kappa } => kappa,
        }
    }

    /// Window of round `i` (1-based).
    pub fn time(&self, i: usize) -> f64 {
        assert!((1..=self.rounds).contains(&i), "round {i} out of range");
        2f64.powi((self.rounds - i) as i32) * std::f64::consts::PI / self.kappa()
    }

    pub fn times(&self) -> Vec<f64> {
        (1..=self.rounds).map(|i| self.time(i)).collect()
    }

    pub fn total_time(&self) -> f64 {
        self.times().iter().sum()
    }
}

/// Outcome bits seen so far, `α_1 … α_{i−1}`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeedbackRegister {
    bits: Vec<u8>,
}

impl FeedbackRegister {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument("outcome bits must be 0 or 1".into()));
        }
        Ok(FeedbackRegister { bits: bits.to_vec() })
    }

    pub fn push(&mut self, bit: u8) {
        debug_assert!(bit <= 1);
        self.bits.push(bit);
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// `φ_i = π − 2π · 0.0α_{i−1}…α_1` (binary), for the upcoming round `i`.
    pub fn phase(&self) -> f64 {
        let i = self.bits.len() + 1;
        let j: u64 = self.bits.iter().enumerate().map(|(k, &b)| (b as u64) << k).sum();
        std::f64::consts::PI - 2.0 * std::f64::consts::PI * (j as f64) / 2f64.powi(i as i32)
    }
}

pub fn feedback_phase(reg: &FeedbackRegister) -> f64 {
    reg.phase()
}

/// Dyadic index `j` of `ϑ = j/2^m = 0.α_m…α_1`.
pub fn outcome_index(bits: &[u8]) -> u64 {
    bits.iter().enumerate().map(|(k, &b)| (b as u64) << k).sum()
}

/// Inverse of [`outcome_index`].
pub fn outcome_bits(index: u64, rounds: usize) -> Vec<u8> {
    (0..rounds).map(|k| ((index >> k) & 1) as u8).collect()
}

pub fn theta_of(bits: &[u8]) -> f64 {
    outcome_index(bits) as f64 / 2f64.powi(bits.len() as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn feedback_phases() {
        assert_eq!(FeedbackRegister::new().phase(), PI);
        assert_relative_eq!(FeedbackRegister::from_bits(&[1]).unwrap().phase(), PI / 2.0, epsilon = 1e-15);
        assert_relative_eq!(FeedbackRegister::from_bits(&[1, 0, 1]).unwrap().phase(), 0.375 * PI, epsilon = 1e-15);
        assert!(FeedbackRegister::from_bits(&[2]).is_err());
    }

    #[test]
    fn outcome_encoding() {
        // ϑ = 0.α_3 α_2 α_1: α_1 is the least significant digit.
        assert_eq!(theta_of(&[1, 0, 0]), 0.125);
        assert_eq!(theta_of(&[0, 0, 1]), 0.5);
        assert_eq!(theta_of(&[1, 1, 0, 1]), 0.6875);
        for j in 0..64 {
            assert_eq!(outcome_index(&outcome_bits(j, 6)), j);
        }
    }

    #[test]
    fn rotation_times() {
        let chi = 2.0 * PI * 2.0;
        let s = QpeSchedule::rotation(4, 2, chi).unwrap();
        // t_i = 2·2^{m−i}π/(χN)
        for i in 1..=4 {
            assert_relative_eq!(s.time(i), 2.0 * 2f64.powi(4 - i as i32) * PI / (chi * 2.0), epsilon = 1e-15);
        }
        assert_relative_eq!(s.total_time(), 3.75, epsilon = 1e-12);
    }

    #[test]
    fn quadrature_times() {
        let g = 2.0 * PI * 21.5;
        let s = QpeSchedule::quadrature(3, Axis::Q, g).unwrap();
        for i in 1..=3 {
            assert_relative_eq!(s.time(i), 2f64.powi(3 - i as i32) * PI / (g * (2.0 * PI).sqrt()), epsilon = 1e-15);
        }
        let prep = QpeSchedule::gkp_preparation(3, Axis::Q, g).unwrap();
        assert_relative_eq!(prep.time(1), s.time(1) / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn invalid_schedules() {
        assert!(QpeSchedule::rotation(0, 3, 1.0).is_err());
        assert!(QpeSchedule::rotation(3, 0, 1.0).is_err());
        assert!(QpeSchedule::rotation(3, 3, -1.0).is_err());
        assert!(QpeSchedule::custom(3, 0.0).is_err());
    }
}
