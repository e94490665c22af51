use thiserror::Error;

/// Failures of a run, each mapped to a process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(conelab_core::Error),
    #[error("{0} check(s) failed")]
    Assertion(usize),
}

impl From<conelab_core::Error> for CliError {
    fn from(e: conelab_core::Error) -> Self {
        match e {
            conelab_core::Error::Io(io) => CliError::Io(io),
            other => CliError::Core(other),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::Io(io),
            other => CliError::Config(format!("{other:?}")),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}

impl CliError {
    /// 0 pass, 1 assertion failure, 2 configuration error, 3 I/O error.
    pub fn exit_code(&self) -> i32 {
        use conelab_core::Error as E;
        match self {
            CliError::Assertion(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Core(e) => match e {
                E::Io(_) => 3,
                E::Degenerate(_) | E::Inconsistency(_) | E::StaleInput(_) => 1,
                _ => 2,
            },
        }
    }
}
