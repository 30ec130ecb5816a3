use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("rank loss during orthonormalisation: numerical rank {rank} of {requested}")]
    RankLoss { rank: usize, requested: usize },

    #[error("stochastic basis is not orthonormal and zero-mean (defect {defect:e})")]
    NonOrthonormal { defect: f64 },

    #[error("unknown boundary tag `{0}`")]
    UnknownBoundaryTag(String),

    #[error("singular matrix: zero pivot at row {row}")]
    Singular { row: usize },

    #[error("matrix is not positive definite (row {row})")]
    NotPositiveDefinite { row: usize },

    #[error("near-singular stochastic system: condition estimate {condition:e}")]
    NearSingular { condition: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NotConverged { what: &'static str, iterations: usize },

    #[error("numerical blow-up at step {step}: norm {norm:e}")]
    BlowUp { step: usize, norm: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse(_) | Error::Unsupported(_) | Error::UnknownBoundaryTag(_) => 1,
            Error::InvalidInput(_) | Error::DimensionMismatch { .. } | Error::Io(_) => 1,
            _ => 2,
        }
    }
}
