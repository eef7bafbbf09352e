use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: hycosbm::Error,
    },
    #[error(transparent)]
    Core(#[from] hycosbm::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) | CliError::Input { source: e, .. } if e.is_numerical() => 2,
            _ => 1,
        }
    }
}
