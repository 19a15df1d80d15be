use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("Fisher information matrix is singular (|det| = {det:e})")]
    SingularFim { det: f64 },

    #[error("non-finite function value at probe coordinate {index}")]
    NonFinite { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("target coincides with node at ({x}, {y})")]
    CoincidentPoints { x: f64, y: f64 },

    #[error("path list is empty")]
    EmptyPaths,

    #[error(
        "infeasible layout: {count} antennas at spacing {spacing} need {needed} wavelengths, range is {range}"
    )]
    InfeasibleLayout {
        count: usize,
        spacing: f64,
        needed: f64,
        range: f64,
    },

    #[error("no feasible step after {0} halvings")]
    NoFeasibleStep(usize),

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
