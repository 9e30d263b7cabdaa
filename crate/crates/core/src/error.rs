use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its admissible range; names the parameter.
    #[error("invalid parameter `{name}`: {reason}")]
    Input { name: String, reason: String },

    /// A length scale is too small for the grid spacing.
    #[error("unresolved: {0}")]
    Resolution(String),

    /// The requested (sigma, gamma) point lies outside the construction's regime.
    #[error("regime mismatch: {0}")]
    Regime(String),

    /// An eigen or linear solver did not produce a usable answer.
    #[error("solver failure: {0}")]
    Solver(String),

    #[error("unsupported functional kind `{0}`")]
    Unsupported(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub fn input(name: &str, reason: impl Into<String>) -> Self {
        Error::Input {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
