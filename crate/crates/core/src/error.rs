use thiserror::Error;

/// Errors produced by the vecfield pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no surface: mesh has no triangles")]
    NoSurface,
    #[error("sign undefined: mesh is not watertight")]
    SignUndefined,
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("field type mismatch: {0}")]
    FieldType(String),
    #[error("degenerate view: no visible surface samples")]
    DegenerateView,
    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
