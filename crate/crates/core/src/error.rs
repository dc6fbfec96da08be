use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported Hurst index H = {hurst}: {reason}")]
    UnsupportedHurst { hurst: f64, reason: &'static str },

    #[error("degenerate normalizer: {normalizer} = {value:e} is below the identifiability threshold")]
    Degenerate { normalizer: &'static str, value: f64 },

    #[error("estimate undefined: {0}")]
    UndefinedEstimate(String),

    #[error("quadrature did not converge on [{lo}, {hi}]: estimate {value:e}, error {error:e}")]
    QuadratureFailure { lo: f64, hi: f64, value: f64, error: f64 },

    #[error("covariance embedding is not positive semidefinite (min eigenvalue {min_eigenvalue:e}) and dense size {size} exceeds the limit {limit}")]
    EmbeddingFailure {
        min_eigenvalue: f64,
        size: usize,
        limit: usize,
    },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable category, used on stderr and for exit codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::UnsupportedHurst { .. } => "unsupported_hurst",
            Error::Degenerate { .. } => "degenerate",
            Error::UndefinedEstimate(_) => "undefined_estimate",
            Error::QuadratureFailure { .. } => "quadrature_failure",
            Error::EmbeddingFailure { .. } => "embedding_failure",
            Error::NotPositiveDefinite => "not_positive_definite",
            Error::Numerical(_) => "numerical",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn check_hurst_open(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(Error::UnsupportedHurst {
            hurst: h,
            reason: "H must lie in (0, 1)",
        })
    }
}
