use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    Lattice(String),

    #[error("infeasible geometry: {0}")]
    Geometry(String),

    #[error("invalid disorder spec: {0}")]
    Disorder(String),

    #[error("realization index {index} out of range (sample count {count})")]
    IndexOutOfRange { index: u64, count: u64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "operator dimension {dim} exceeds the diagonalization cap {cap}; use the Chebyshev propagator path"
    )]
    CapExceeded { dim: usize, cap: usize },

    #[error("boundary leak {leak:.3e} exceeds {threshold:.1e} at t = {time}; largest safe T_max on this grid is {safe_t_max}")]
    BoundaryLeak {
        time: f64,
        leak: f64,
        threshold: f64,
        safe_t_max: f64,
    },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
