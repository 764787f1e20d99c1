//! Noise: the discrete loss channel and Lindblad evolution of the
//! ancilla ⊗ mode composite.

mod lindblad;
mod loss;

pub use lindblad::{
    default_hardware_model, hardware_model, lindblad_evolve, CompositeState, HardwareCoupling,
    LindbladModel, SparseOperator,
};
pub use loss::{apply_loss, LossChannel};

use serde::{Deserialize, Serialize};

/// Hardware parameters in laboratory units: couplings as χ/2π and g/2π in
/// MHz, decay rates in 1/μs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HardwareParams {
    pub chi_mhz: f64,
    pub g_mhz: f64,
    /// Ancilla relaxation rate Γ₁.
    pub gamma1_per_us: f64,
    /// Cavity loss rate Γ₂.
    pub gamma2_per_us: f64,
    /// Integration step in μs; derived from the couplings and rates when absent.
    pub step_us: Option<f64>,
}

impl Default for HardwareParams {
    fn default() -> Self {
        HardwareParams {
            chi_mhz: 2.0,
            g_mhz: 21.5,
            gamma1_per_us: 0.02,
            gamma2_per_us: 0.001,
            step_us: None,
        }
    }
}

impl HardwareParams {
    /// χ in rad/μs.
    pub fn chi(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.chi_mhz
    }

    /// g in rad/μs.
    pub fn g(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.g_mhz
    }

    pub fn noiseless(mut self) -> Self {
        self.gamma1_per_us = 0.0;
        self.gamma2_per_us = 0.0;
        self
    }
}
