//! Command-line laboratory on top of `benney_core`: run configuration,
//! builtin initial data, subcommands and the acceptance checks.

pub mod builtins;
pub mod checks;
pub mod commands;
pub mod config;
pub mod oracle;
pub mod tolerances;

use benney_core::polyfam::PolyError;
use benney_core::solver::SolverError;
use benney_core::spectral::SpectralError;
use benney_core::wavegen::WaveError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Csv(#[from] benney_core::io::IoError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Wave(#[from] WaveError),
}

impl LabError {
    /// 2 for usage, configuration and input-file errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::Usage(_) | LabError::Csv(_) => 2,
            _ => 1,
        }
    }
}

/// Applies `BENNEY_LAB_THREADS` to the global rayon pool.
pub fn configure_threads(value: Option<&str>) -> Result<(), LabError> {
    let Some(v) = value else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        LabError::Usage(format!(
            "BENNEY_LAB_THREADS must be a positive integer, got `{v}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| LabError::Usage(format!("cannot size the thread pool: {e}")))
}
