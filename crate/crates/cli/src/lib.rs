//! Experiment runner: loads a JSON config, runs one of the registered
//! experiments and writes a result bundle (manifest, histogram CSV, optional
//! Wigner CSV and a summary JSON).

pub mod config;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};

use boson_qpe::Error;

pub use config::{ExperimentConfig, ExperimentKind};
pub use output::{ResultBundle, Table};

/// Environment variable naming the directory result bundles are written under.
pub const OUTPUT_ROOT_VAR: &str = "BOSON_QPE_OUTPUT";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Sim(e) => match e {
                Error::InvalidArgument(_) | Error::NotCoprime { .. } | Error::EnumerationCost { .. } => 2,
                Error::InvalidDimension(_)
                | Error::DimensionMismatch { .. }
                | Error::InsufficientDimension { .. }
                | Error::KrausCutoff { .. } => 3,
                Error::Integrator { .. } => 4,
                Error::SelectionFailure { .. } | Error::Unreachable { .. } => 5,
                _ => 1,
            },
            CliError::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "dimension",
            4 => "integrator",
            5 => "post-selection",
            _ => "runtime",
        }
    }

    /// One-line JSON error record for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        })
        .to_string()
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Worker threads for trajectory sampling; 0 uses every core.
    pub workers: usize,
    /// Replaces `sampling.seed` from the config.
    pub seed: Option<u64>,
    pub dry_run: bool,
    pub extended: bool,
    pub output_root: PathBuf,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            workers: 0,
            seed: None,
            dry_run: false,
            extended: false,
            output_root: std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from).unwrap_or_else(|| "results".into()),
        }
    }
}

/// What `run` produced: the derived schedule for a dry run, or the
/// directory holding the written bundle.
#[derive(Debug)]
pub enum RunOutcome {
    DryRun(serde_json::Value),
    Written(PathBuf),
}

pub fn run(config_path: &Path, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let mut cfg = ExperimentConfig::load(config_path)?;
    if let Some(seed) = opts.seed {
        cfg.sampling.seed = seed;
    }
    if cfg.extended && !opts.extended {
        return Err(CliError::Config(format!(
            "{} is an extended run; pass --extended to execute it",
            config_path.display()
        )));
    }
    if opts.dry_run {
        return Ok(RunOutcome::DryRun(experiments::derived_schedule(&cfg)?));
    }
    let bundle = experiments::execute(&cfg, opts.workers)?;
    let stem = config_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    let dir = opts.output_root.join(cfg.output.directory.clone().unwrap_or(stem));
    bundle.write(&dir, &cfg)?;
    Ok(RunOutcome::Written(dir))
}

/// Registry listing in stable order.
pub fn list_experiments(json: bool) -> String {
    if json {
        let entries: Vec<_> = ExperimentKind::ALL
            .iter()
            .map(|k| serde_json::json!({"name": k.name(), "figure": k.figure(), "description": k.summary()}))
            .collect();
        serde_json::to_string_pretty(&entries).expect("static registry")
    } else {
        ExperimentKind::ALL
            .iter()
            .map(|k| format!("{:<16} [{}] {}\n", k.name(), k.figure(), k.summary()))
            .collect()
    }
}
