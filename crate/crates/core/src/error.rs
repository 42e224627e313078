use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("polar angle undefined: point coincides with the reference center")]
    DegeneratePoint,

    #[error("mesh quality: cell {cell} has non-positive area {area:e}")]
    MeshQuality { cell: usize, area: f64 },

    #[error("solver did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("negative Rayleigh quotient {0:e}: assembled pencil is not positive definite")]
    NegativeRayleigh(f64),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("symmetry violated: {0}")]
    Symmetry(String),

    #[error("polarizer not aligned with the sample grid: {0}")]
    Alignment(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("point ({x}, {y}) could not be located in the mesh")]
    PointLocation { x: f64, y: f64 },

    #[error("at s = {s}: {source}")]
    AtOffset { s: f64, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// The innermost error, past any offset context.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtOffset { source, .. } => source.root(),
            other => other,
        }
    }
}
