use std::path::PathBuf;

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),
    #[error("io on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("trace {path}: {message}")]
    Trace { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] envpes_core::Error),
}

impl BenchError {
    /// Short category used in the CLI's error line.
    pub fn kind(&self) -> &'static str {
        match self {
            BenchError::Config(_) => "config",
            BenchError::Io { .. } => "io",
            BenchError::Csv(_) => "csv",
            BenchError::Trace { .. } => "trace",
            BenchError::Core(_) => "model",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Io { path: path.into(), source }
    }
}
