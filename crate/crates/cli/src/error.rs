use std::path::Path;

use ecm_core::dpm::DpmError;
use ecm_core::expansion::ExpansionError;
use ecm_core::preprocess::PreprocessError;
use ecm_core::simbench::SimError;
use ecm_core::{HmmError, ProfileError, TreeError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn input(msg: impl std::fmt::Display) -> Self {
        CliError::Input(msg.to_string())
    }

    /// Prefixes the message with the file it came from.
    pub fn at(self, path: &Path) -> Self {
        let p = path.display();
        match self {
            CliError::Usage(m) => CliError::Usage(m),
            CliError::Input(m) => CliError::Input(format!("{p}: {m}")),
            CliError::Numeric(m) => CliError::Numeric(format!("{p}: {m}")),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(format!("malformed JSON: {e}"))
    }
}

impl From<ProfileError> for CliError {
    fn from(e: ProfileError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<TreeError> for CliError {
    fn from(e: TreeError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<HmmError> for CliError {
    fn from(e: HmmError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<DpmError> for CliError {
    fn from(e: DpmError) -> Self {
        match e {
            DpmError::NonFinite(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<PreprocessError> for CliError {
    fn from(e: PreprocessError) -> Self {
        match e {
            PreprocessError::BetaDraw(..) => CliError::Numeric(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<ExpansionError> for CliError {
    fn from(e: ExpansionError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Dpm(e) => e.into(),
            SimError::Preprocess(e) => e.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}
