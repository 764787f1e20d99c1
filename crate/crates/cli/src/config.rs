//! Declarative experiment configs (JSON, schema version 1).

use std::path::Path;

use boson_qpe::codes::{
    binomial_primitive, code_plus_state, code_state, coherent_state, gkp_state, squeezed_vacuum,
    GkpSpec, RotationCodeSpec,
};
use boson_qpe::noise::{apply_loss, HardwareParams, LossChannel};
use boson_qpe::{Complex64, FockDim, State};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    DetectRotation,
    DetectGkp,
    PrepareCode,
    FockGenerate,
    InfidelityScan,
    HeisenbergScan,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::DetectRotation,
        ExperimentKind::DetectGkp,
        ExperimentKind::PrepareCode,
        ExperimentKind::FockGenerate,
        ExperimentKind::InfidelityScan,
        ExperimentKind::HeisenbergScan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::DetectRotation => "detect-rotation",
            ExperimentKind::DetectGkp => "detect-gkp",
            ExperimentKind::PrepareCode => "prepare-code",
            ExperimentKind::FockGenerate => "fock-generate",
            ExperimentKind::InfidelityScan => "infidelity-scan",
            ExperimentKind::HeisenbergScan => "heisenberg-scan",
        }
    }

    pub fn figure(self) -> &'static str {
        match self {
            ExperimentKind::DetectRotation => "Fig. 2(a), Fig. S2",
            ExperimentKind::DetectGkp => "Fig. 2(b), Fig. S8",
            ExperimentKind::PrepareCode => "Figs. S3, S4, S9",
            ExperimentKind::FockGenerate => "Fig. S5",
            ExperimentKind::InfidelityScan => "Fig. S7",
            ExperimentKind::HeisenbergScan => "Fig. S6(a)",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            ExperimentKind::DetectRotation => "loss detection on a rotation code: outcome histogram and deduced photon loss",
            ExperimentKind::DetectGkp => "dual-quadrature displacement detection on a finite-energy GKP state",
            ExperimentKind::PrepareCode => "code-word preparation by post-selected projection of a primitive state",
            ExperimentKind::FockGenerate => "photon-number detection and Fock-state generation with coprime moduli",
            ExperimentKind::InfidelityScan => "total detection infidelity versus the number of rounds",
            ExperimentKind::HeisenbergScan => "deduction infidelity versus total evolution time",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Logical {
    Zero,
    One,
    Plus,
}

/// Input (or reference) state; `dim` is the Fock truncation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    /// `n` may be left out in scans that rebuild the code for each modulus.
    Cat {
        n: Option<usize>,
        alpha: f64,
        dim: usize,
        #[serde(default = "plus")]
        logical: Logical,
    },
    Binomial {
        n: Option<usize>,
        k: usize,
        dim: usize,
        #[serde(default = "plus")]
        logical: Logical,
    },
    Gkp {
        delta: f64,
        dim: usize,
        #[serde(default = "zero")]
        logical: Logical,
        #[serde(default)]
        k_range: Option<usize>,
    },
    Coherent {
        alpha: f64,
        #[serde(default)]
        alpha_im: f64,
        dim: usize,
    },
    Fock {
        n: usize,
        dim: usize,
    },
    Squeezed {
        r: f64,
        dim: usize,
    },
    BinomialPrimitive {
        n: usize,
        k: usize,
        dim: usize,
    },
}

fn plus() -> Logical {
    Logical::Plus
}

fn zero() -> Logical {
    Logical::Zero
}

impl StateSpec {
    pub fn dim(&self) -> usize {
        match *self {
            StateSpec::Cat { dim, .. }
            | StateSpec::Binomial { dim, .. }
            | StateSpec::Gkp { dim, .. }
            | StateSpec::Coherent { dim, .. }
            | StateSpec::Fock { dim, .. }
            | StateSpec::Squeezed { dim, .. }
            | StateSpec::BinomialPrimitive { dim, .. } => dim,
        }
    }

    /// Symmetry order of a rotation code, if this is one.
    pub fn order(&self) -> Option<usize> {
        match *self {
            StateSpec::Cat { n, .. } | StateSpec::Binomial { n, .. } => n,
            _ => None,
        }
    }

    pub fn with_order(&self, order: usize) -> StateSpec {
        let mut out = self.clone();
        if let StateSpec::Cat { n, .. } | StateSpec::Binomial { n, .. } = &mut out {
            *n = Some(order);
        }
        out
    }

    pub fn is_rotation_code(&self) -> bool {
        matches!(self, StateSpec::Cat { .. } | StateSpec::Binomial { .. })
    }

    pub fn build(&self) -> Result<State, CliError> {
        let dim = FockDim::new(self.dim())?;
        let rotation = |spec: RotationCodeSpec, logical: Logical| match logical {
            Logical::Zero => code_state(&spec),
            Logical::One => code_state(&spec.with_mu(1)?),
            Logical::Plus => code_plus_state(&spec),
        };
        let order = |n: Option<usize>| n.ok_or_else(|| CliError::Config("rotation code needs its order `n`".into()));
        Ok(match *self {
            StateSpec::Cat { n, alpha, logical, .. } => rotation(RotationCodeSpec::cat(order(n)?, alpha, 0, dim)?, logical)?,
            StateSpec::Binomial { n, k, logical, .. } => rotation(RotationCodeSpec::binomial(order(n)?, k, 0, dim)?, logical)?,
            StateSpec::Gkp { delta, logical, k_range, .. } => {
                let mu = match logical {
                    Logical::Zero => 0,
                    Logical::One => 1,
                    Logical::Plus => return Err(CliError::Config("GKP inputs take logical zero or one".into())),
                };
                let mut spec = GkpSpec::new(delta, mu, dim)?;
                if let Some(k) = k_range {
                    spec = spec.with_k_range(k)?;
                }
                gkp_state(&spec)?
            }
            StateSpec::Coherent { alpha, alpha_im, .. } => coherent_state(Complex64::new(alpha, alpha_im), dim)?,
            StateSpec::Fock { n, .. } => State::fock(n, dim)?,
            StateSpec::Squeezed { r, .. } => squeezed_vacuum(r, dim)?,
            StateSpec::BinomialPrimitive { n, k, .. } => binomial_primitive(n, k, dim)?,
        })
    }
}

/// Photon loss applied to the input before detection; give exactly one of
/// the two parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    #[serde(default)]
    pub chi: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
}

impl LossSpec {
    pub fn channel(&self) -> Result<LossChannel, CliError> {
        match (self.chi, self.gamma) {
            (Some(chi), None) => Ok(LossChannel::from_chi(chi)?),
            (None, Some(g)) => Ok(LossChannel::from_gamma(g)?),
            _ => Err(CliError::Config("loss takes exactly one of `chi` and `gamma`".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rounds {
    One(usize),
    Many(Vec<usize>),
}

impl Rounds {
    pub fn list(&self) -> Vec<usize> {
        match self {
            Rounds::One(m) => vec![*m],
            Rounds::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub rounds: Rounds,
    /// Rotation modulus N; defaults to the order of the input code.
    #[serde(default)]
    pub modulus: Option<u64>,
    /// Coprime moduli for staged detection, or the list scanned over.
    #[serde(default)]
    pub moduli: Option<Vec<u64>>,
    /// Dispersive coupling χ/2π in MHz; defaults to the hardware table.
    #[serde(default)]
    pub chi_mhz: Option<f64>,
    /// Quadrature coupling g/2π in MHz; defaults to the hardware table.
    #[serde(default)]
    pub g_mhz: Option<f64>,
    /// Target photon number (fock-generate) or logical index (prepare-code).
    #[serde(default)]
    pub target: Option<u64>,
    /// Displacement `(x, p)` applied to a GKP input, in units of √π.
    #[serde(default)]
    pub injected: Option<[f64; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Exact,
    Sampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_attempts")]
    pub max_attempts: u64,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
}

fn default_samples() -> u64 {
    10_000
}

fn default_attempts() -> u64 {
    100_000
}

fn default_estimator() -> EstimatorKind {
    EstimatorKind::Exact
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec {
            samples: default_samples(),
            seed: 0,
            max_attempts: default_attempts(),
            estimator: default_estimator(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Square Wigner grid `[−extent, extent]²` with `points` samples per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerGrid {
    pub extent: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Relative to the output root; defaults to the config's file stem.
    #[serde(default)]
    pub directory: Option<String>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    #[serde(default)]
    pub wigner: Option<WignerGrid>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { directory: None, formats: default_formats(), wigner: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub description: String,
    /// Long runs that only execute with `--extended`.
    #[serde(default)]
    pub extended: bool,
    pub code: StateSpec,
    /// State the prepared output is compared with (prepare-code).
    #[serde(default)]
    pub reference: Option<StateSpec>,
    #[serde(default)]
    pub loss: Option<LossSpec>,
    pub schedule: ScheduleSpec,
    /// Hardware table; when present every cell runs under the master equation.
    #[serde(default)]
    pub noise: Option<HardwareParams>,
    #[serde(default)]
    pub sampling: SamplingSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}, expected {SCHEMA_VERSION}", self.schema_version));
        }
        let rounds = self.schedule.rounds.list();
        if rounds.is_empty() || rounds.contains(&0) {
            return bad("rounds must be positive".into());
        }
        let single = rounds.len() == 1;
        let s = &self.schedule;
        match self.experiment {
            ExperimentKind::DetectRotation => {
                if !single {
                    return bad("detect-rotation takes a single `rounds` value".into());
                }
                if self.modulus().is_none() {
                    return bad("detect-rotation needs `schedule.modulus` or a rotation-code input".into());
                }
            }
            ExperimentKind::DetectGkp => {
                if !single {
                    return bad("detect-gkp takes a single `rounds` value".into());
                }
                if !matches!(self.code, StateSpec::Gkp { .. }) {
                    return bad("detect-gkp needs a GKP input".into());
                }
            }
            ExperimentKind::PrepareCode => {
                if !single {
                    return bad("prepare-code takes a single `rounds` value".into());
                }
                match self.code {
                    StateSpec::Squeezed { .. } => {}
                    StateSpec::Coherent { .. } | StateSpec::BinomialPrimitive { .. } => {
                        if s.modulus.is_none() {
                            return bad("prepare-code needs `schedule.modulus` for rotation codes".into());
                        }
                    }
                    _ => return bad("prepare-code starts from a coherent, binomial-primitive or squeezed state".into()),
                }
                if s.target.unwrap_or(0) > 1 {
                    return bad("prepare-code `target` is a logical index, 0 or 1".into());
                }
            }
            ExperimentKind::FockGenerate => {
                if !single {
                    return bad("fock-generate takes a single `rounds` value".into());
                }
                if s.moduli.as_ref().is_none_or(|m| m.is_empty()) {
                    return bad("fock-generate needs `schedule.moduli`".into());
                }
                if s.target.is_none() {
                    return bad("fock-generate needs `schedule.target`".into());
                }
            }
            ExperimentKind::InfidelityScan => {
                if !self.code.is_rotation_code() {
                    return bad("infidelity-scan needs a cat or binomial input".into());
                }
                if self.modulus().is_none() {
                    return bad("infidelity-scan needs `schedule.modulus` or the code order".into());
                }
            }
            ExperimentKind::HeisenbergScan => {
                if !self.code.is_rotation_code() {
                    return bad("heisenberg-scan needs a cat or binomial input".into());
                }
                if s.moduli.as_ref().is_none_or(|m| m.is_empty()) {
                    return bad("heisenberg-scan needs `schedule.moduli`".into());
                }
                if rounds.len() < 2 {
                    return bad("heisenberg-scan needs at least two `rounds` values".into());
                }
                if self.noise.is_some() {
                    return bad("heisenberg-scan is noiseless; drop `noise`".into());
                }
            }
        }
        if let Some(loss) = &self.loss {
            loss.channel()?;
        }
        if let Some(w) = &self.output.wigner {
            if w.points < 2 || !(w.extent > 0.0) {
                return bad("wigner grid needs at least 2 points and a positive extent".into());
            }
        }
        if self.sampling.samples == 0 {
            return bad("`sampling.samples` must be positive".into());
        }
        Ok(())
    }

    pub fn modulus(&self) -> Option<u64> {
        self.schedule.modulus.or(self.code.order().map(|n| n as u64))
    }

    pub fn hardware(&self) -> HardwareParams {
        let mut p = self.noise.unwrap_or_default();
        if let Some(chi) = self.schedule.chi_mhz {
            p.chi_mhz = chi;
        }
        if let Some(g) = self.schedule.g_mhz {
            p.g_mhz = g;
        }
        p
    }

    /// The input state with the configured loss applied.
    pub fn input_state(&self) -> Result<State, CliError> {
        self.lossy(self.code.build()?)
    }

    pub fn lossy(&self, state: State) -> Result<State, CliError> {
        match &self.loss {
            Some(loss) => Ok(apply_loss(&state, &loss.channel()?)?),
            None => Ok(state),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "experiment": "detect-rotation",
        "code": {"family": "cat", "n": 3, "alpha": 2.0, "dim": 30},
        "schedule": {"rounds": 4}
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.modulus(), Some(3));
        assert_eq!(cfg.sampling.samples, 10_000);
        assert_eq!(cfg.output.formats, vec![Format::Csv, Format::Json]);
        assert_eq!(cfg.hardware(), HardwareParams::default());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = MINIMAL.replace("\"rounds\": 4", "\"rounds\": 4, \"foo\": 1");
        assert!(matches!(ExperimentConfig::parse(&text), Err(CliError::Config(_))));
        let text = MINIMAL.replace("detect-rotation", "detect-everything");
        assert!(matches!(ExperimentConfig::parse(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn schema_version_is_checked() {
        let text = MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(ExperimentConfig::parse(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn per_experiment_requirements() {
        let text = MINIMAL.replace("detect-rotation", "fock-generate");
        assert!(ExperimentConfig::parse(&text).is_err());
        let text = MINIMAL.replace("detect-rotation", "detect-gkp");
        assert!(ExperimentConfig::parse(&text).is_err());
        let text = MINIMAL.replace("\"rounds\": 4", "\"rounds\": [3, 4]");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn loss_takes_one_parameter() {
        let text = MINIMAL.replace("\"schedule\"", "\"loss\": {\"chi\": 0.1, \"gamma\": 0.1}, \"schedule\"");
        assert!(ExperimentConfig::parse(&text).is_err());
        let text = MINIMAL.replace("\"schedule\"", "\"loss\": {\"gamma\": 0.03}, \"schedule\"");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        assert!(cfg.input_state().unwrap().as_density().is_some());
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        let back = ExperimentConfig::parse(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
