use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration rejected: {0}")]
    ConfigurationRejected(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("unsupported bundle: {0}")]
    UnsupportedBundle(String),

    #[error("newton solve failed after {iterations} iterations (residual {residual:e})")]
    StepFailure { iterations: usize, residual: f64 },

    #[error("divergence detected (max |coefficient| = {magnitude:e})")]
    Divergence { magnitude: f64 },

    #[error("at t = {time}: {source}")]
    AtTime {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("ensemble too small: stderr {stderr:e} exceeds tolerance {tolerance:e}; need M >= {required_m}")]
    EnsembleTooSmall {
        stderr: f64,
        tolerance: f64,
        required_m: usize,
    },

    #[error("pullback horizon S = {given} too short for bias tolerance; need S >= {required}")]
    HorizonTooShort { given: f64, required: f64 },

    #[error("io error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn at_time(self, time: f64) -> Error {
        match self {
            e @ Error::AtTime { .. } => e,
            e => Error::AtTime {
                time,
                source: Box::new(e),
            },
        }
    }

    /// Strips any time annotation.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures of a single simulated path (counted, not fatal, in Monte Carlo loops).
    pub fn is_path_failure(&self) -> bool {
        matches!(
            self.root(),
            Error::StepFailure { .. } | Error::Divergence { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
