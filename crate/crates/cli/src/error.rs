use std::process::ExitCode;

/// A failed command together with its exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or configuration (exit 2).
    #[error("{0}")]
    Usage(String),
    /// Unreadable, malformed or inconsistent data (exit 3).
    #[error("{0}")]
    Data(String),
    /// Training diverged (exit 4).
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        })
    }
}

impl From<vidspeech::Error> for CliError {
    fn from(e: vidspeech::Error) -> Self {
        use vidspeech::Error as E;
        match e {
            E::InvalidConfig(_) => CliError::Usage(e.to_string()),
            E::Diverged { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}
