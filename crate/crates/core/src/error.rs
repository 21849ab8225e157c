use thiserror::Error;

/// Errors raised by the surface laboratory.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("warping function vanishes at t = {t}")]
    WarpVanishes { t: f64 },

    #[error("radial curvature is not finite at t = {t}")]
    NonFiniteCurvature { t: f64 },

    #[error("bad parameter `{name}`: {reason}")]
    BadParameter { name: String, reason: String },

    #[error("integration step underflow at s = {s}")]
    StepUnderflow { s: f64 },

    #[error("geodesic left the domain at arc length s = {s}")]
    LeftDomain { s: f64 },

    #[error("geodesic reached the pole at arc length s = {s}")]
    PoleHit { s: f64 },

    #[error("zero tangent vector")]
    ZeroVector,

    #[error("no connecting geodesic found between ({x_t}, {x_theta}) and ({y_t}, {y_theta})")]
    NoConnectionFound {
        x_t: f64,
        x_theta: f64,
        y_t: f64,
        y_theta: f64,
    },

    #[error("triangle ({a}, {b}, {c}) does not fit in the sector of angle {delta0}: d(delta0) = {d_at_edge}")]
    NoSolutionInSector {
        a: f64,
        b: f64,
        c: f64,
        delta0: f64,
        d_at_edge: f64,
    },

    #[error("distance is not monotone in the apex angle near {delta_theta}")]
    MonotonicityViolation { delta_theta: f64 },

    #[error("geodesic left the domain at s = {s} before any cut candidate")]
    HorizonTooSmall { s: f64 },

    #[error("horizon {horizon} exhausted before the Busemann estimate converged (increment {increment})")]
    HorizonExhausted { horizon: f64, increment: f64 },

    #[error("total curvature {c} (bound {bound}) does not exceed pi")]
    TotalCurvatureNotAbovePi { c: f64, bound: f64 },

    #[error("direction family fails to cover {} ray directions", uncovered.len())]
    CoveringFailed { uncovered: Vec<f64> },

    #[error("precondition failed: {0}")]
    Gate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: field `{field}`: {message}")]
    SpecFile {
        path: String,
        field: String,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn bad_param(name: &str, reason: impl Into<String>) -> Error {
    Error::BadParameter {
        name: name.to_string(),
        reason: reason.into(),
    }
}
