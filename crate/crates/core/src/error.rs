use thiserror::Error;

/// Errors reported by the coordinate maps and the verification engine.
///
/// Degeneracy variants carry the name of the chart-boundary they hit
/// (`VerticalC`, `CoplanarOrbits`, ...) in their message so callers can
/// surface the offending locus verbatim.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("NonFinite: non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("Collision: bodies {i} and {j} coincide")]
    Collision { i: usize, j: usize },

    #[error("CollisionAbort: minimum distance {min_distance:e} under threshold at step {step}")]
    CollisionAbort { step: usize, min_distance: f64 },

    #[error("NonElliptic: two-body energy {energy} is not negative")]
    NonElliptic { energy: f64 },

    #[error("Rectilinear: angular momentum {ratio:e} of circular scale (ellipse {ellipse})")]
    Rectilinear { ellipse: usize, ratio: f64 },

    #[error("Circular: eccentricity {e:e} below tolerance (ellipse {ellipse})")]
    Circular { ellipse: usize, e: f64 },

    #[error("ZeroAngularMomentum: partial angular momentum vanishes at level {level}")]
    ZeroAngularMomentum { level: usize },

    #[error("VerticalC: total angular momentum within {sin_angle:e} of vertical")]
    VerticalC { sin_angle: f64 },

    #[error("CoplanarOrbits: normalized node length {sin_angle:e} at level {level}")]
    CoplanarOrbits { level: usize, sin_angle: f64 },

    #[error("TriangleViolation: |{g1} - {g2}| <= {c} <= {g1} + {g2} fails")]
    TriangleViolation { g1: f64, g2: f64, c: f64 },

    #[error("NodesSingular: C = {c} must be positive")]
    NodesSingular { c: f64 },

    #[error("invalid eccentricity {e}: must lie in [0, 1)")]
    InvalidEccentricity { e: f64 },

    #[error("invalid elements: {0}")]
    InvalidElements(String),

    #[error("chart domain violation at {context}")]
    DomainViolation { context: &'static str },

    #[error("chart '{0}' has no dual-number forward path")]
    NoDualPath(String),

    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
