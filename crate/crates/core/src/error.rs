use thiserror::Error;

/// Errors raised by the simulation and analysis pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state is not normalized (norm = {0:.3e})")]
    NotNormalized(f64),

    #[error("time step too large: {0}")]
    StepTooLarge(String),

    #[error("positivity violated at t = {time}: minimum eigenvalue {min_eigenvalue:.3e}")]
    PositivityViolation { time: f64, min_eigenvalue: f64 },

    #[error("stationary state is not unique (mismatch between independent solves {0:.3e})")]
    DegenerateStationaryState(f64),

    #[error("eigensolver did not converge after {restarts} restarts (residual {residual:.3e})")]
    NotConverged { restarts: usize, residual: f64 },

    #[error("leading eigenvalue is not real (imaginary part {0:.3e})")]
    ComplexLeadingEigenvalue(f64),

    #[error("activity cross-check failed: Hellmann-Feynman {hellmann_feynman:.8} vs finite difference {finite_difference:.8}")]
    ActivityMismatch {
        hellmann_feynman: f64,
        finite_difference: f64,
    },

    #[error("left eigenmatrix is not positive (relative eigenvalue {0:.3e})")]
    NotPositive(f64),

    #[error("singular matrix in factorization (column {0})")]
    Singular(usize),

    #[error("residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepTooLarge(_)
                | Error::PositivityViolation { .. }
                | Error::DegenerateStationaryState(_)
                | Error::NotConverged { .. }
                | Error::ComplexLeadingEigenvalue(_)
                | Error::ActivityMismatch { .. }
                | Error::NotPositive(_)
                | Error::Singular(_)
                | Error::Residual { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
