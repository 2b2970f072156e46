use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of bounds for size {bound}")]
    IndexOutOfBounds { index: usize, bound: usize },

    #[error("negative entry {value} at position {index}")]
    NegativeEntry { index: usize, value: f64 },

    #[error("empty reduced system")]
    EmptySystem,

    #[error("no sign change of N_R(k) - {c}·N_C(k) found for k in [1, {upper}]")]
    NoSignChange { c: f64, upper: f64 },

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("enumeration of {count} subsets exceeds the limit of {limit}")]
    EnumerationGuard { count: u128, limit: u128 },

    #[error("matrix market parse error at line {line}: {msg}")]
    MatrixMarket { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
