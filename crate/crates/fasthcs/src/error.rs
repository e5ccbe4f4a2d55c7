use thiserror::Error;

/// Errors surfaced by the library.
///
/// The split matters to callers: everything except [`Error::Numerical`] is a
/// problem with the caller's data or configuration, while `Numerical` means an
/// internal routine failed on input that should have been workable.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed data: wrong shape, non-finite entries, unparseable cells.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Data that is syntactically fine but carries no usable structure
    /// (e.g. all rows identical).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Inconsistent or out-of-range configuration parameters.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A fitting subset with fewer rows than the requested components allow.
    #[error("subset too small: need at least {need} rows, got {got}")]
    SubsetTooSmall { need: usize, got: usize },

    /// A model whose trailing eigenvalues are zero where a positive value is
    /// required (score distances need every component variance > 0).
    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    /// The simulation harness could not realize a requested contamination.
    #[error("generation error: {0}")]
    Generation(String),

    /// An internal numerical routine failed (SVD non-convergence and the like).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
