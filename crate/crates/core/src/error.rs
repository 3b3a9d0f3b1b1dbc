use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("polynomial degree must be at least 1")]
    DegreeZero,
    #[error("polynomial degree {r} exceeds the supported maximum {max}")]
    DegreeTooHigh { r: usize, max: usize },
    #[error("unknown point family `{0}`")]
    UnknownFamily(String),
    #[error("invalid Lagrange nodes: {0}")]
    InvalidNodes(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DaeError {
    #[error("{what}: expected dimension {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid problem definition: {0}")]
    Invalid(String),
    #[error("mass matrix must be skew-symmetric when it is not the identity")]
    MassNotSkew,
    #[error("non-finite value from {what} at t = {t}")]
    NonFinite { what: &'static str, t: f64 },
}

/// Failure of one step solve (cG interval or Radau step).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("singular Newton matrix at t = {t_start} (pivot {pivot:e}, norm {norm:e}); g_x may be rank deficient or the step too large")]
    SingularNewtonMatrix { t_start: f64, pivot: f64, norm: f64 },
    #[error("Newton did not converge at t = {t_start} after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        t_start: f64,
        iterations: usize,
        residual: f64,
    },
    #[error("invalid step: {0}")]
    InvalidStep(String),
    #[error(transparent)]
    Dae(#[from] DaeError),
    #[error(transparent)]
    Basis(#[from] BasisError),
}

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("unknown baseline `{0}`")]
    UnknownBaseline(String),
    #[error("invalid study configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Step(#[from] StepError),
}
