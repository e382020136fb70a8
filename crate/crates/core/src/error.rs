use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("operator and state live in different sectors (N = {expected} vs N = {found})")]
    BasisMismatch { expected: usize, found: usize },

    #[error("1-RDM with |gamma| = {gamma_rho} lies outside the Bloch sphere of radius {radius}")]
    NotRepresentable { gamma_rho: f64, radius: f64 },

    #[error("target is not reachable as a nondegenerate ground state of W + h.J")]
    NotVRepresentable,

    #[error("the functional at gamma = 0 is a directional limit; an approach angle is required")]
    DirectionRequired,

    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("finite-difference estimate is noise dominated (Richardson mismatch {0:e})")]
    NoisyDerivative(f64),

    #[error("constrained search did not converge (constraint residual {0:e})")]
    NotConverged(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
