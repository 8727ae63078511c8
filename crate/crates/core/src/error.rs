use thiserror::Error;

/// Errors raised by the geometry, dynamics and search layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("zero vector has no Finsler direction")]
    ZeroVector,
    #[error("vector is not on the indicatrix (L = {0})")]
    NotOnIndicatrix(f64),
    #[error("covector is not on the figuratrix (dual norm = {0})")]
    NotOnFiguratrix(f64),
    #[error("no convergence in {0}")]
    NoConvergence(&'static str),
    #[error("magnetic field too strong: |alpha| = {0} must be < 1")]
    FieldTooStrong(f64),
    #[error("coincident endpoints")]
    CoincidentPoints,
    #[error("chord of length {chord} does not fit a Larmor circle of diameter {diameter}")]
    ChordTooLongForField { chord: f64, diameter: f64 },
    #[error("restricted velocity Hessian is singular")]
    SingularMass,
    #[error("departure direction is tangent to the boundary (conormal pairing {0:e})")]
    GrazingDeparture(f64),
    #[error("geodesic does not leave the table")]
    NoExit,
    #[error("incoming direction is tangent to the boundary (conormal pairing {0:e})")]
    GrazingRay(f64),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("ambiguous canonicalization: two rotations coincide within tolerance")]
    AmbiguousCanonicalization,
    #[error("polygon has zero winding")]
    ZeroWinding,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
    #[error("billiard step {index} failed: {source}")]
    Step { index: usize, source: Box<Error> },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
