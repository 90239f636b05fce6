//! Hand-rolled dense linear algebra and quadratic programming.
//!
//! Everything the controllers need lives here: row-major matrices, LU with
//! partial pivoting, Householder QR with column pivoting, minimum-norm least
//! squares, a power-iteration spectral radius, and a null-space active-set QP
//! solver with a bounded-variable least-squares phase 1. No external solver
//! dependency.

mod linalg;
mod matrix;
mod qp;
mod settings;
mod vector;

pub use linalg::{
    invert, lu_factor, min_norm_least_squares, qr_col_pivot, solve_linear, spectral_radius,
    LuFactors, PivotedQr,
};
pub use matrix::DenseMatrix;
pub use qp::{solve_qp, solve_qp_warm, ActiveBound, BoundSide, QpProblem, QpSolution, QpStatus};
pub use settings::NumericSettings;
pub use vector::DenseVector;
