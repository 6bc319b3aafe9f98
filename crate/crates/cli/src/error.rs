use std::path::PathBuf;

use thiserror::Error;

/// Exit codes: 1 usage or config problems, 2 data problems, 3 numerical
/// failure. Success is 0 as usual.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Data(String),
    #[error("non-finite loss: {0}")]
    NonFinite(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::File { .. } | CliError::Data(_) => 2,
            CliError::NonFinite(_) => 3,
        }
    }

    pub fn file(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::File { path, source }
    }
}

impl From<corpus::CorpusError> for CliError {
    fn from(e: corpus::CorpusError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<eval::EvalError> for CliError {
    fn from(e: eval::EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<greenmeter::GreenError> for CliError {
    fn from(e: greenmeter::GreenError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<cvt_train::TrainError> for CliError {
    fn from(e: cvt_train::TrainError) -> Self {
        use cvt_train::TrainError as T;
        match e {
            T::NonFiniteLoss { .. } => CliError::NonFinite(e.to_string()),
            T::Config(_) => CliError::Config(e.to_string()),
            T::Encoder(encoder::EncoderError::Config(m)) => CliError::Config(m),
            other => CliError::Data(other.to_string()),
        }
    }
}
