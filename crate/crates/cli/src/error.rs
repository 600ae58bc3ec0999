use std::fmt;
use std::path::Path;

use slicesim_core::compare::CompareError;
use slicesim_core::evaluate::EvaluateError;
use slicesim_core::io::{AlignError, MetaImageError, WindowError};
use slicesim_core::{DegradeError, VolumeError};

/// A failed command, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments (exit 2).
    Usage(String),
    /// Unreadable or unwritable files (exit 3).
    Io(String),
    /// Inputs that are well formed but cannot be processed (exit 4).
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Domain(_) => 4,
        }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Domain(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<MetaImageError> for CliError {
    fn from(e: MetaImageError) -> Self {
        match e {
            MetaImageError::Volume(v) => v.into(),
            MetaImageError::Range { .. }
            | MetaImageError::DomainMismatch(_)
            | MetaImageError::NonUniformSpacing => CliError::Domain(e.to_string()),
            other => CliError::Io(other.to_string()),
        }
    }
}

impl From<DegradeError> for CliError {
    fn from(e: DegradeError) -> Self {
        match e {
            DegradeError::InvalidParameter { .. } => CliError::Usage(e.to_string()),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<VolumeError> for CliError {
    fn from(e: VolumeError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<AlignError> for CliError {
    fn from(e: AlignError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<EvaluateError> for CliError {
    fn from(e: EvaluateError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<CompareError> for CliError {
    fn from(e: CompareError) -> Self {
        match e {
            CompareError::Degrade {
                source: DegradeError::InvalidParameter { .. },
                ..
            }
            | CompareError::TooFewMethods => CliError::Usage(e.to_string()),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<WindowError> for CliError {
    fn from(e: WindowError) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;
