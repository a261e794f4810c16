use alloc::string::String;
use core::fmt;

/// Errors raised by the estimation core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An index fell outside the grid.
    Range { what: &'static str, index: usize, bound: usize },
    /// Tensor, field or matrix dimensions disagree.
    Shape(String),
    /// An argument violates an operation precondition.
    Argument(String),
    /// SPA ran out of residual energy before picking the requested count.
    RankDeficient { requested: usize, found: usize },
    /// The kernel has an all-zero row, so no positive scaling exists.
    DegenerateKernel { row: usize },
    /// Iterative or factorization routine failed.
    Numerical(String),
    /// The ADMM residual exploded.
    Divergence { iteration: usize, residual: f64 },
    /// Operation requires a linear (explicit-matrix) denoiser.
    UnsupportedDenoiser(String),
    /// Failure reported by an external denoiser.
    Plugin(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Range { what, index, bound } => {
                write!(f, "{what} index {index} out of range (bound {bound})")
            }
            Error::Shape(msg) => write!(f, "shape mismatch: {msg}"),
            Error::Argument(msg) => write!(f, "invalid argument: {msg}"),
            Error::RankDeficient { requested, found } => write!(
                f,
                "rank deficient: requested {requested} anchor columns, residual collapsed after {found}"
            ),
            Error::DegenerateKernel { row } => write!(f, "degenerate kernel: row {row} is zero"),
            Error::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            Error::Divergence { iteration, residual } => {
                write!(f, "ADMM diverged at iteration {iteration} (residual {residual:e})")
            }
            Error::UnsupportedDenoiser(msg) => write!(f, "unsupported denoiser: {msg}"),
            Error::Plugin(msg) => write!(f, "denoiser plugin error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn shape_err(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}

pub(crate) fn arg_err(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}
