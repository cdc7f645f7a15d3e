use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("eigenfunction is not positive (min value {min:.3e}); refine the grid")]
    EigenfunctionNotPositive { min: f64 },

    #[error("no biological infected equilibrium: {0}")]
    NoInfectedEquilibrium(String),

    #[error("uninfected state stable, no positive eigenvalue (lambda0 = {lambda0:.6e})")]
    NoPositiveEigenvalue { lambda0: f64 },

    #[error("iterate left the sub/super-solution sandwich at iteration {iteration} (excess {excess:.3e})")]
    SandwichViolation { iteration: usize, excess: f64 },

    #[error("negative density {value:.3e} at step {step}; reduce dt")]
    Negativity { step: usize, value: f64 },

    #[error("non-finite state at step {step}")]
    Blowup { step: usize },

    #[error("heterogeneous alpha: {0}")]
    Heterogeneous(&'static str),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
