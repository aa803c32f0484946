use thiserror::Error;

/// Errors raised by the queueing, reward and optimization routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// An unbounded queue was requested with `lambda >= mu`.
    #[error("unstable queue: lambda = {lambda} >= mu = {mu}")]
    Unstable { lambda: f64, mu: f64 },

    /// A linear solve or series evaluation failed its accuracy check.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A grid search had no feasible point.
    #[error("empty feasible grid: {0}")]
    EmptyGrid(String),

    /// A comparison that needs finite optima got an unbounded one.
    #[error("undefined comparison: {0}")]
    UndefinedComparison(String),

    /// Invalid experiment or simulation configuration.
    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// Short machine-readable code, used for `ERR:<code>` table cells.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Unstable { .. } => "unstable",
            Error::Numerical(_) => "numerical",
            Error::EmptyGrid(_) => "empty-grid",
            Error::UndefinedComparison(_) => "undefined",
            Error::Config(_) => "config",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
