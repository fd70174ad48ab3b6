//! Bubble solutions of the perturbed fractional critical equation
//!
//! ```text
//! (-Δ)^s u = ε h u₊^q + u₊^p   on ℝⁿ,   p = (n+2s)/(n−2s)
//! ```
//!
//! built by Lyapunov–Schmidt reduction around the bubble manifold
//! `z_{μ,ξ}`: spectral fields on a stereographic grid, the reduced functional
//! Γ(μ,ξ), a Newton–Krylov solver for the auxiliary equation, and an executable
//! Stampacchia iteration.
//!
//! Everything is generic over the scalar type (`f32`/`f64`); the aliases below fix `f64`.

// `!(x > 0)` style guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bubble;
pub mod error;
pub mod field;
mod krylov;
pub mod landscape;
pub mod model;
pub mod num;
pub mod quadrature;
pub mod reduction;
pub mod regularity;

pub use error::{Error, Result};
pub use num::Real;

pub type Params64 = model::ProblemParams<f64>;
pub type Weight64 = model::CompactWeight<f64>;
pub type Grid64 = field::Grid<f64>;
pub type Field64 = field::Field<f64>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
