use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error(transparent)]
    Solver(#[from] bernoulli_core::error::Error),

    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("missing or incomplete run artifacts: {0}")]
    MissingArtifacts(String),
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), source }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::ConfigInvalid(_) => "ConfigInvalid",
            CliError::Solver(e) => e.kind(),
            CliError::Io { .. } => "Io",
            CliError::MissingArtifacts(_) => "MissingArtifacts",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigInvalid(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io { .. } | CliError::MissingArtifacts(_) => 4,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        let path = e.position().map(|p| format!("csv record {}", p.record())).unwrap_or_else(|| "csv".into());
        CliError::Io { path, source: std::io::Error::other(e.to_string()) }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
