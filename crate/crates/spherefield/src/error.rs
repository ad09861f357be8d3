use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation rejected an argument. `name` identifies the
    /// offending field so config diagnostics can point at it.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The certified series truncation error cannot be brought below the
    /// requested tolerance without exceeding the degree cap.
    #[error(
        "series tolerance {tol:.3e} unreachable at degree cap {cap} \
         (theta = {theta:.6e}, best certified bound {achievable:.3e})"
    )]
    ToleranceUnreachable {
        theta: f64,
        tol: f64,
        cap: u32,
        achievable: f64,
    },

    /// Cholesky failed even after escalating the diagonal jitter to its cap.
    #[error("covariance matrix not positive definite even with jitter {max_jitter:.3e}")]
    NotPositiveDefinite { max_jitter: f64 },

    /// A sampled field value fell outside the level grid of a histogram.
    #[error("field value {value:.6e} (component {component}) outside the level grid")]
    ValueOutsideGrid { value: f64, component: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
