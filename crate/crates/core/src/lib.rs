//! Critical superprocesses on finite state spaces.
//!
//! A finite-state superprocess is a multitype continuous-state branching
//! process: mass moves between states with rate matrix `Q`, is killed at
//! the row-sum deficit of `Q`, and branches with the local mechanism
//! `Ψ(x, z) = β(x)(-a(x)z + b(x)z² + Σ_k w_k(e^{-z y_k} - 1 + z y_k))`.
//!
//! The crate computes the objects that govern the long-time behaviour of
//! a critical model (principal eigenvalue zero): the Perron pair `φ₀, ψ₀`,
//! the spectral gap, the constants `ν` and `σ_f²`, survival probabilities
//! from the log-Laplace equation, conditional Laplace transforms, and
//! unconditional moments. A Monte Carlo engine simulates the process and
//! tests the conditional limit laws statistically.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the simulator and the
//! command-line tool use.

// `!(x > 0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod error;
pub mod linalg;
pub mod loglaplace;
pub mod model;
pub mod moments;
pub mod montecarlo;
pub mod quad;
pub mod reference;
pub mod scalar;
pub mod spectral;
pub mod vector;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Model = model::SuperprocessModel<f64>;
pub type Spectral = spectral::SpectralData<f64>;
pub type Field = vector::FieldVector<f64>;
pub type Measure = vector::MeasureVector<f64>;

