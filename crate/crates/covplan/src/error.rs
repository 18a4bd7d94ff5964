use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("feasibility: {0}")]
    Infeasible(String),

    #[error("infeasible transition: distance {distance} not reachable within {duration} s at max speed {max_speed}")]
    InfeasibleTransition {
        distance: f64,
        duration: f64,
        max_speed: f64,
    },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("constraint violation: {0}")]
    Violation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
