use thiserror::Error;

/// Errors raised by the geometric and analytic operations of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point is off the manifold by {distance:e}")]
    OffManifold { distance: f64 },

    #[error("vector is not tangent at its base point (normal component {normal:e})")]
    NotTangent { normal: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("metric degenerates at t = {t}: B + tC = {value:e}")]
    MetricDegenerate { t: f64, value: f64 },

    #[error("constructed profile is not positive at t = {t} (value {value:e})")]
    ConstructionFailed { t: f64, value: f64 },

    #[error("tangent vectors are based at different points")]
    MismatchedBase,
}

pub type Result<T> = std::result::Result<T, Error>;
