use thiserror::Error;

/// Unified error type for the whole laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes do not line up.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    /// A pivot fell below the singularity threshold during factorization.
    #[error("matrix is numerically singular (pivot {pivot:.3e} at step {step})")]
    SingularMatrix { step: usize, pivot: f64 },
    /// An iterative method ran out of iterations.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    /// Some agent has no influence path from any stubborn agent.
    #[error("network is not lambda-connected")]
    NotLambdaConnected,
    /// An index referred outside the container it addresses.
    #[error("index {index} out of range for length {len}")]
    InvalidIndex { index: usize, len: usize },
    /// A recommendation input left the unit interval.
    #[error("input {value} outside the accepted range [0, 1]")]
    InputOutOfRange { value: f64 },
    /// The terminal target cannot be reached within the horizon.
    #[error("terminal target unreachable within the horizon: problem infeasible")]
    TerminalInfeasible,
    /// The quadratic-program solver gave up.
    #[error("quadratic program failed: {reason}")]
    QpFailure { reason: String },
    /// Random network generation exhausted its attempt budget.
    #[error("network generation failed after {attempts} attempts")]
    GenerationFailed { attempts: usize },
    /// A NaN or infinity appeared where a finite value is required.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;
