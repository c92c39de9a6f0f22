use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coefficient {value} at ({x}, {y}) is not positive")]
    ContrastViolation { x: f64, y: f64, value: f64 },

    #[error("conjugate gradients did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("snapshot {index} failed: {source}")]
    Snapshot {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("subdomain mask selects no nodes")]
    EmptyMask,

    #[error("unknown family `{0}`")]
    UnknownFamily(String),

    #[error("coefficient family `{0}` has no affine decomposition")]
    NotAffine(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("numerical rank {rank} is below the required {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("requested {requested} basis functions but numerical rank is {rank}")]
    ExceedsRank { requested: usize, rank: usize },

    #[error("source and target masks overlap")]
    OverlappingMasks,

    #[error("non-finite training loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
