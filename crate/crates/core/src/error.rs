use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SwanError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SwanError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate geometry: antenna and user coincide")]
    DegenerateGeometry,

    #[error("pilot length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("tag design needs T >= M, got T = {t}, M = {m}")]
    DesignTooShort { t: usize, m: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("tag Gram matrix is singular; use the sparse-recovery path for this design")]
    SingularDesign,

    #[error("exhaustive search over 2^{m} states exceeds the cap of M = {max}")]
    ComplexityGuard { m: usize, max: usize },

    #[error("MAP oracle requires scaled-identity probing tags")]
    NotIdentityProbe,

    #[error("coordinate descent did not converge within {sweeps} sweeps")]
    IterationLimit { sweeps: usize, last: Vec<f64> },

    #[error("failure indicator marks segment {0} which is already failed in the reference state")]
    SupportViolation(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("config parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
