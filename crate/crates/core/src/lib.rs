//! Closed-loop laboratory for recommendation control of Friedkin-Johnsen
//! opinion networks.
//!
//! The crate models a social network in which users update opinions by
//! averaging over who they listen to while retaining a stubborn attachment to
//! their initial view, plus one recommendation-system node whose "opinion" is
//! the control input. On top of that plant it provides two engagement-greedy
//! controllers — a model-free averaging rule and a model-predictive controller
//! built around a hand-rolled active-set quadratic-program solver — together
//! with analysis tools (equivalence certificates, opinion-shift reports) and a
//! reproducible experiment harness (network sampling, batch studies, CSV/JSON
//! export).
//!
//! All numeric kernels are generic over the scalar type via [`Real`];
//! `f64`-concrete aliases ([`Matrix`], [`Vector`]) are exported at the crate
//! root and used by the harness.

pub mod analysis;
pub mod controllers;
mod error;
pub mod harness;
pub mod numerics;
pub mod opinion_model;
pub mod plant;

pub use error::{Error, Result};
pub use numerics::{DenseMatrix, DenseVector, NumericSettings};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Scalar type the numeric kernels are generic over (`f64`, `f32`).
pub trait Real:
    Float + NumAssign + FromPrimitive + ToPrimitive + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
    /// Converts an `f64` constant (tolerances, literals) into `Self`.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 constant must convert")
    }
    /// Lossy view as `f64` for reporting and error payloads.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float
        + NumAssign
        + FromPrimitive
        + ToPrimitive
        + std::fmt::Debug
        + std::fmt::Display
        + Send
        + Sync
        + 'static
{
}

/// Double-precision matrix used by the harness and CLI.
pub type Matrix = DenseMatrix<f64>;
/// Double-precision vector used by the harness and CLI.
pub type Vector = DenseVector<f64>;
/// Single-precision matrix alias.
pub type Matrix32 = DenseMatrix<f32>;
/// Single-precision vector alias.
pub type Vector32 = DenseVector<f32>;
