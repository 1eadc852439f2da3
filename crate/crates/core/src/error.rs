use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Metzler: entry ({row}, {col}) = {value}")]
    NotMetzler { row: usize, col: usize, value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("inflow is infeasible at link {index}: equilibrium density {equilibrium} is not below supply limit {limit}")]
    InfeasibleInflow { index: usize, equilibrium: f64, limit: f64 },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("integration produced a non-finite state at t = {time}")]
    BlowUp { time: f64 },

    #[error("state component {component} = {value} left the hard domain [{lower}, {upper}] at t = {time}")]
    DomainViolation { time: f64, component: usize, value: f64, lower: f64, upper: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual})")]
    NoConvergence { iterations: usize, residual: f64, last: Vec<f64> },

    #[error("model must be autonomous for this operation")]
    NotAutonomous,

    #[error("model must be periodic for this operation")]
    NotPeriodic,

    #[error("certificate kind {kind} cannot produce a {form} Lyapunov function")]
    KindFormMismatch { kind: String, form: String },

    #[error("an equilibrium is required: {0}")]
    MissingEquilibrium(String),

    #[error("certificate is not usable: {0}")]
    UnusableCertificate(String),

    #[error("weight refinement failed at epsilon {epsilon:?}: worst measure {worst}")]
    RefinementFailed { epsilon: Vec<f64>, worst: f64 },

    #[error("point {residual} away from equilibrium (|f| must be below {tolerance})")]
    NotAnEquilibrium { residual: f64, tolerance: f64 },

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("model spec: {0}")]
    Spec(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name: name.to_string(), reason: reason.into() }
}
