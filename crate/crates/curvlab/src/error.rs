//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A coordinate vector violates its model constraint (hyperboloid sheet,
    /// tangency, unit norm) beyond tolerance.
    #[error("invalid point: {0}")]
    InvalidPoint(String),

    /// An argument is outside the operation's domain (dimension, radius, order).
    #[error("domain error: {0}")]
    Domain(String),

    /// A chart evaluation produced a degenerate tangent frame.
    #[error("singular chart at (u, v) = ({u}, {v}): {what}")]
    SingularChart { u: f64, v: f64, what: String },

    /// Mismatched ambients, bad resolutions, malformed scenarios.
    #[error("config error: {0}")]
    Config(String),

    /// A geometric precondition failed (non-nested regions, non-convex input,
    /// degenerate point sets, open meshes).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Normal flow reached a focal point: the area factor lost positivity.
    #[error("flow singularity at t = {t}: factor {factor} for curvature {kappa}")]
    FlowSingularity { t: f64, kappa: f64, factor: f64 },

    /// A point set does not span a full-dimensional convex body.
    #[error("degenerate hull: {0}")]
    DegenerateHull(String),

    /// A combinatorial surface failed a closedness or manifoldness check.
    #[error("topology error: {0}")]
    Topology(String),

    /// A perturbation is too large to keep the surface embedded.
    #[error("perturbation too large: {0}")]
    PerturbationTooLarge(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
