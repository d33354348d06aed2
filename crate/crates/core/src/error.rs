use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("curve needs at least {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },
    #[error("ambient dimension must be at least 2, got {0}")]
    Dimension(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite coordinate at node {0}")]
    NonFinite(usize),
    #[error("degenerate curve: chord {index} has length {length:e}")]
    Degenerate { index: usize, length: f64 },
    #[error("mesh too non-uniform for the stencils (segment ratio {0:.4})")]
    NonUniformMesh(f64),
    #[error("invalid plane ({0}, {1}) in dimension {2}")]
    InvalidPlane(usize, usize, usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical blow-up: {0}")]
    Blowup(String),
    #[error("resampling failed: {0}")]
    Resample(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
