//! Crate-wide error type and result alias.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SfouError>;

#[derive(Debug, Error)]
pub enum SfouError {
    /// A precondition on an argument was violated (out-of-range parameter,
    /// wrong argument ordering, unsupported Hurst regime).
    #[error("domain error: {0}")]
    Domain(String),

    /// Panel doubling stopped before the relative tolerance was met.
    /// Carries the last two estimates so the caller can judge how far off
    /// the refinement stalled.
    #[error(
        "quadrature did not converge after {refinements} refinements \
         (last two estimates: {previous:e}, {latest:e})"
    )]
    QuadratureNonConvergence {
        refinements: u32,
        previous: f64,
        latest: f64,
    },

    /// Numerical failure: factorization breakdown, indefinite covariance,
    /// degenerate pilot statistics and the like.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Observed information is zero, so the drift estimate is undefined.
    #[error("degenerate path: observed information is zero")]
    DegeneratePath,

    /// A path was combined with a cache or grid it was not built for.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Invalid run configuration (bad key, bad value, missing field).
    #[error("config error: {0}")]
    Config(String),

    /// A Monte Carlo replicate failed; the index identifies the stream.
    #[error("replicate {rep} failed: {source}")]
    Replicate {
        rep: usize,
        #[source]
        source: Box<SfouError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl SfouError {
    pub fn domain(msg: impl Into<String>) -> Self {
        SfouError::Domain(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        SfouError::Numeric(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        SfouError::Config(msg.into())
    }

    /// Exit-code classification used by the command-line driver:
    /// 1 for configuration/argument problems, 2 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            SfouError::Domain(_)
            | SfouError::Config(_)
            | SfouError::GridMismatch(_)
            | SfouError::Io(_)
            | SfouError::Serialize(_) => 1,
            SfouError::QuadratureNonConvergence { .. }
            | SfouError::Numeric(_)
            | SfouError::DegeneratePath => 2,
            SfouError::Replicate { source, .. } => source.exit_code(),
        }
    }
}
