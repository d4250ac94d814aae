use thiserror::Error;

pub type Result<T, E = CdrError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CdrError {
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("invalid noise model: {0}")]
    Noise(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error("chain diagnostic: {0}")]
    Chain(String),

    #[error("fit did not converge: {0}")]
    Convergence(String),

    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CdrError {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        CdrError::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CdrError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            CdrError::Parse { .. } | CdrError::Config { .. } | CdrError::Invalid(_) => 2,
            CdrError::Noise(_) => 2,
            CdrError::Capacity(_) => 3,
            CdrError::Domain(_)
            | CdrError::Degenerate(_)
            | CdrError::Chain(_)
            | CdrError::Convergence(_) => 4,
            CdrError::Io(_) => 1,
        }
    }
}
