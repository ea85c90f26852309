use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix contains a non-finite entry")]
    NonFinite,

    #[error("not a density operator: {0}")]
    NotDensity(String),

    #[error("{routine} failed to converge after {sweeps} sweeps")]
    NoConvergence { routine: &'static str, sweeps: usize },

    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("Kraus list is empty")]
    EmptyKraus,

    #[error("map is not completely positive (min Choi eigenvalue {0:e})")]
    NotCompletelyPositive(f64),

    #[error("map is ill-conditioned or singular (condition number {0:e})")]
    IllConditioned(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("trace drift {drift:e} at t = {time} exceeds bound (substep {substep:e}); reduce the step size")]
    IntegrationDrift { time: f64, drift: f64, substep: f64 },

    #[error("matrix is not column-stochastic: {0}")]
    NotStochastic(String),

    #[error("dissipators are not in canonical form: {0}")]
    NonCanonical(String),

    #[error("time {0} is not a grid point")]
    NotOnGrid(f64),

    #[error("dynamical map is not invertible at t = {time} (condition number {condition:e})")]
    Singular { time: f64, condition: f64 },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
