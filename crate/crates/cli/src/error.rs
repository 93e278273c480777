use std::path::PathBuf;

use forced_chain::greens::GreensError;
use forced_chain::spectral::SpectralError;
use forced_chain::time_domain::TimeDomainError;
use forced_chain::diagnostics::DiagnosticsError;
use thiserror::Error;

use crate::spec::SpecError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("resonance gate: {0}")]
    Resonance(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("oracle failure: {0}")]
    Oracle(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Resonance(_) => 3,
            CliError::NonConvergence(_) => 4,
            CliError::Oracle(_) => 5,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<SpecError> for CliError {
    fn from(e: SpecError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<GreensError> for CliError {
    fn from(e: GreensError) -> Self {
        match e {
            GreensError::Resonance { .. } | GreensError::InBand { .. } | GreensError::Pole { .. } => {
                CliError::Resonance(e.to_string())
            }
            other => CliError::Oracle(other.to_string()),
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::Greens(g) => g.into(),
            SpectralError::OutsideRadius { .. } => CliError::Resonance(e.to_string()),
            SpectralError::NonConvergence { .. } | SpectralError::Divergence { .. } | SpectralError::Truncation { .. } => {
                CliError::NonConvergence(e.to_string())
            }
            other => CliError::Oracle(other.to_string()),
        }
    }
}

impl From<TimeDomainError> for CliError {
    fn from(e: TimeDomainError) -> Self {
        match e {
            TimeDomainError::Spectral(s) => s.into(),
            TimeDomainError::Usage(u) => CliError::Config(u),
            TimeDomainError::BlowUp { .. } | TimeDomainError::NonConvergence { .. } | TimeDomainError::Singular => {
                CliError::NonConvergence(e.to_string())
            }
            other => CliError::Oracle(other.to_string()),
        }
    }
}

impl From<DiagnosticsError> for CliError {
    fn from(e: DiagnosticsError) -> Self {
        match e {
            DiagnosticsError::Spectral(s) => s.into(),
            DiagnosticsError::Shape { .. } => CliError::Config(e.to_string()),
            other => CliError::Oracle(other.to_string()),
        }
    }
}
