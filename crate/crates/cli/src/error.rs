use std::fmt;

/// Failure classes with stable process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed or invalid configuration (exit 2).
    Config(String),
    /// The value iteration did not reach its tolerance (exit 3).
    NonConvergence(String),
    /// A policy needs a value-function artifact that is not there (exit 4).
    MissingArtifact(String),
    /// Anything else (exit 1).
    Other(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::MissingArtifact(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::NonConvergence(m) => write!(f, "no convergence: {m}"),
            CliError::MissingArtifact(m) => write!(f, "missing artifact: {m}"),
            CliError::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Other(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.into())
    }
}

impl From<poisson_disorder::Error> for CliError {
    fn from(e: poisson_disorder::Error) -> Self {
        match e {
            poisson_disorder::Error::NonConvergence { .. } => CliError::NonConvergence(e.to_string()),
            poisson_disorder::Error::InvalidConfig(_) | poisson_disorder::Error::InvalidParameter { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Other(other.into()),
        }
    }
}
