use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not positive semi-definite: smallest eigenvalue {min_eigenvalue:e}")]
    NotPsd { min_eigenvalue: f64 },
    #[error("Cayley transform is singular: I + {lambda}K could not be factorized")]
    SingularCayley { lambda: f64 },
    #[error("interconnection matrix is not skew-symmetric: {0}")]
    SkewViolation(String),
    #[error("waveform grids differ: {0}")]
    GridMismatch(String),
    #[error("step matrix is singular for h = {h:e}; try a different grid")]
    SingularStepMatrix { h: f64 },
    #[error("matrix pencil sE - A is not regular")]
    IrregularPencil,
    #[error("block {block} has a singular E; the Jacobi engine only handles differential subsystems")]
    NonInvertibleE { block: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("model file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
