use thiserror::Error;

use crate::io::FormatError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("mode {mode} out of range for order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("non-finite value at linear index {0}")]
    NonFinite(usize),

    #[error("rank {rank} out of range (must be in 1..={max})")]
    RankOutOfRange { rank: usize, max: usize },

    #[error("SVD did not converge after {sweeps} sweeps")]
    SvdNoConvergence { sweeps: usize },

    /// Gram matrix of a factor (or its companion) is numerically singular.
    #[error("singular Gram matrix in mode {mode} (condition estimate {condition:e})")]
    SingularGram { mode: usize, condition: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("zero tensor has no condition number")]
    ZeroTensor,

    #[error("factor of mode {mode} is not orthonormal (deviation {deviation:e})")]
    NotOrthonormal { mode: usize, deviation: f64 },

    #[error("matrix is not {alpha}-sparse (measured {measured})")]
    NotSparse { alpha: f64, measured: f64 },

    #[error("infeasible corruption support: {0}")]
    Infeasible(String),

    #[error("sweep spec line {line}, field `{field}`: {message}")]
    SpecParse {
        line: usize,
        field: String,
        message: String,
    },

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
