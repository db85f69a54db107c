use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A process specification or law parameter violates one of its invariants.
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested computation is not available for this model family or law.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Parameters sit exactly on a regime boundary where no result applies.
    #[error("regime boundary: {0}")]
    RegimeBoundary(String),

    /// Minimum long-run variance condition `min_j sigma_jj >= c` failed.
    #[error("assumption violated (min_j sigma_jj >= c): {0}")]
    DegenerateVariance(String),

    #[error("missing input: {0}")]
    Missing(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag for structured error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSpec(_) => "invalid_spec",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Unsupported(_) => "unsupported",
            Error::RegimeBoundary(_) => "regime_boundary",
            Error::DegenerateVariance(_) => "degenerate_variance",
            Error::Missing(_) => "missing",
            Error::Numerical(_) => "numerical",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}

pub(crate) fn invalid_arg(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn invalid_spec(msg: impl Into<String>) -> Error {
    Error::InvalidSpec(msg.into())
}
