use crate::solver::ConvergenceTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("index out of range: {0}")]
    Index(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("malformed cube file at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error(
        "degenerate spectral response: band {band} has no guide contribution in the selected range"
    )]
    DegenerateResponse { band: usize },

    #[error("band {band} of the reference has zero mean")]
    SingularBand { band: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("solver diverged at iteration {iteration}")]
    Diverged {
        iteration: usize,
        trace: Box<ConvergenceTrace>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
