use thiserror::Error;

pub type Result<T> = std::result::Result<T, FracregError>;

#[derive(Debug, Error)]
pub enum FracregError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension error: path has {actual} steps, need at least {required}")]
    Dimension { required: usize, actual: usize },

    #[error("config error: {0}")]
    Config(String),

    /// Parameters fall outside the admissible bandwidth region.
    #[error("region error: {0}")]
    Region(String),

    #[error("covariance factorization failed for H={hurst}, n={n}: matrix is not numerically positive definite")]
    Factorization { hurst: f64, n: usize },

    #[error("embedding not nonnegative definite: smallest eigenvalue {min_eigenvalue:e} for H={hurst}, n={n}")]
    Embedding {
        min_eigenvalue: f64,
        hurst: f64,
        n: usize,
    },

    #[error("resource error: {0}")]
    Resource(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl FracregError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        FracregError::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        FracregError::Config(msg.into())
    }
}
