use thiserror::Error;

/// Errors raised by the differentiation kernel and the geometric routines built on it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {point:?} is closer than {reach:e} to the chart boundary")]
    PointOutsideGuard { point: Vec<f64>, reach: f64 },

    #[error("field returned a non-finite value near {point:?}")]
    NonFiniteValue { point: Vec<f64> },

    #[error("guarded interior of the chart box is empty")]
    DegenerateBox,

    #[error("frame is not orthonormal: <e{i}, e{j}> deviates by {deviation:e}")]
    NonOrthonormalFrame { i: usize, j: usize, deviation: f64 },

    #[error("identity {identity} violated by {violation:e} at {point:?}")]
    ToleranceExceeded {
        identity: String,
        point: Vec<f64>,
        violation: f64,
    },

    #[error("fiber angle alpha changes sign on the sampled region")]
    AngleCrossesZero,

    #[error("immersion differential has rank < 2 at {point:?}")]
    DegenerateImmersion { point: Vec<f64> },

    #[error("mean curvature is not constant: spread {spread:e}")]
    NotCmc { spread: f64 },

    #[error("surface is not totally umbilical: |A - H Id| = {deviation:e}")]
    NotUmbilic { deviation: f64 },

    #[error("ODE coefficient singular at alpha = {alpha}")]
    SingularCoefficient { alpha: f64 },

    #[error("initial data rejected: {0}")]
    ImmediateSingularity(String),

    #[error("y = {y} is outside the interior of the profile grid")]
    OutOfProfile { y: f64 },

    #[error("profile is singular (sin(alpha) cos(alpha) ~ 0) at y = {y}")]
    SingularProfile { y: f64 },

    #[error("empty scan range [{lo}, {hi}]")]
    EmptyRange { lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
