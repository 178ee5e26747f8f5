use std::path::PathBuf;

/// Errors produced by the reduced-order modelling pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid machine description: {0}")]
    InvalidSpec(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate triangle {triangle}: signed area {area:e}")]
    DegenerateTriangle { triangle: usize, area: f64 },

    #[error("unknown region tag on triangle {triangle}: {detail}")]
    UnknownRegion { triangle: usize, detail: String },

    #[error("affine group {group} is not congruent: {detail}")]
    GroupDetection { group: String, detail: String },

    #[error("angle index {step} out of range for {n_angles} interface nodes")]
    AngleOutOfRange { step: usize, n_angles: usize },

    #[error("duplicate angle index {0} in sweep")]
    DuplicateAngle(usize),

    #[error("matrix is not symmetric positive definite ({context})")]
    NotPositiveDefinite { context: String },

    #[error("linear solve failed: relative residual {residual:e} exceeds {tolerance:e}")]
    SolverAccuracy { residual: f64, tolerance: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty POD: snapshot matrix has no nonzero column")]
    EmptyPod,

    #[error("eigensolver did not converge after {iterations} iterations (last change {change:e})")]
    EigenNonConvergence { iterations: usize, change: f64 },

    #[error("invalid index sets: {0}")]
    InvalidIndexSets(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Config(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit code: 2 for invalid input, 3 for non-convergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidSpec(_)
            | Error::InvalidMesh(_)
            | Error::UnknownRegion { .. }
            | Error::AngleOutOfRange { .. }
            | Error::DuplicateAngle(_)
            | Error::InvalidIndexSets(_)
            | Error::InvalidArgument(_)
            | Error::Read { .. }
            | Error::Config(_) => 2,
            Error::EigenNonConvergence { .. } => 3,
            _ => 1,
        }
    }
}
