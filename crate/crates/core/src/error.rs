use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("domain too narrow: tail mass {mass:.3e} outside [{lo}, {hi}]")]
    DomainTooNarrow { mass: f64, lo: f64, hi: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("degenerate variance {0:.3e}")]
    DegenerateVariance(f64),
    #[error("empty truncation window |x| <= {0}")]
    EmptyWindow(f64),
    #[error("density below floor everywhere")]
    DegenerateDensity,
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("aliasing detected: boundary mass {0:.3e}")]
    Aliasing(f64),
    #[error("memory budget exceeded: {0} nodes requested")]
    Budget(usize),
    #[error("eigen-iteration did not converge after {iters} iterations (residual {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("disconnected support")]
    DisconnectedSupport,
    #[error("infinite Fisher information")]
    InfiniteFisher,
    #[error("test function undefined on required range: {0}")]
    Undefined(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
