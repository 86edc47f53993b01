use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(
        "constraint matrix is rank deficient (smallest/largest singular value ratio {ratio:.3e})"
    )]
    RankDeficient { ratio: f64 },

    #[error("constraint count m={m} must satisfy 1 <= m < n={n}")]
    BadShape { n: usize, m: usize },

    #[error("quadratic term is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("quadratic term is not positive semidefinite (smallest eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("iterate left the interior: {0}")]
    NotInterior(String),

    #[error("KKT matrix is numerically singular (condition estimate {0:.3e})")]
    SingularKkt(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("problem is infeasible")]
    Infeasible,

    #[error("problem is unbounded")]
    Unbounded,

    #[error("instance too large for enumeration: n={n} exceeds limit {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("no optimal candidate found: {0}")]
    NoOptimalCandidate(String),

    #[error("instance generator exceeded resample limit for seed {0}")]
    ResampleLimit(u64),

    #[error("custom objectives cannot be serialized")]
    Unserializable,
}
