use thiserror::Error;

/// Errors raised by the geometry, gauge-field and index routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point lies within {distance:.3e} of center {center} (exclusion radius {radius:.3e})")]
    PointAtCenter {
        center: usize,
        distance: f64,
        radius: f64,
    },

    #[error("point lies within {distance:.3e} of the Dirac string of center {center} in the active patch")]
    NearDiracString { center: usize, distance: f64 },

    #[error("finite-difference step {step:.3e} too large: {reason}")]
    StepTooLarge { step: f64, reason: String },

    #[error("radius validation failed: {0}")]
    Radius(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("quadrature error estimate {estimate:.3e} exceeds threshold {threshold:.3e}")]
    Quadrature { estimate: f64, threshold: f64 },

    #[error(
        "holonomy parameter lambda/l = {value} is an integer; index and Fredholm evaluation \
         requires exp(2 pi i lambda_j / l) != 1 for every summand"
    )]
    IntegerHolonomy { value: String },

    #[error("missing input: {0}")]
    MissingPiece(String),

    #[error("assembled index {value} is {gap:.3e} from the nearest integer (tolerance {tolerance:.1e})")]
    NotInteger {
        value: f64,
        gap: f64,
        tolerance: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
