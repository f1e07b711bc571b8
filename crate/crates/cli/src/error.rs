use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),
    /// Unreadable or invalid input file.
    #[error("input error: {0}")]
    Input(String),
    /// The computation itself failed (singular system, reflection pole, ...).
    #[error("computation error: {0}")]
    Compute(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Compute(_) | CliError::Output { .. } => 1,
        }
    }

    pub(crate) fn context(self, what: &str) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{what}: {m}")),
            CliError::Input(m) => CliError::Input(format!("{what}: {m}")),
            other => other,
        }
    }

    pub(crate) fn compute(e: impl std::fmt::Display) -> Self {
        CliError::Compute(e.to_string())
    }
}
