use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config: {0}")]
    Config(String),

    /// Input files unsuitable for the requested operation.
    #[error("{0}")]
    Input(String),

    #[error("{stage}: {source}")]
    Core {
        stage: String,
        #[source]
        source: fpv_core::Error,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 64,
            CliError::Core { source, .. } if source.is_io() => 74,
            CliError::Core { .. } | CliError::Input(_) => 2,
            CliError::Io { .. } => 74,
        }
    }
}

/// Attaches a stage name to core errors.
pub trait Stage<T> {
    fn stage(self, name: impl Into<String>) -> Result<T, CliError>;
}

impl<T> Stage<T> for fpv_core::Result<T> {
    fn stage(self, name: impl Into<String>) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core {
            stage: name.into(),
            source,
        })
    }
}

impl<T> Stage<T> for std::io::Result<T> {
    fn stage(self, name: impl Into<String>) -> Result<T, CliError> {
        self.map_err(|source| CliError::Io {
            context: name.into(),
            source,
        })
    }
}
