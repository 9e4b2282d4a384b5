//! Numerical frequency functions, doubling indices and Bernstein-type ratios for harmonic
//! functions and Laplace eigenfunctions on model manifolds.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigen;
pub mod error;
pub mod field;
pub mod frequency;
pub mod io;
pub mod lab;
pub mod quadrature;
pub mod scalar;
pub mod special;
pub mod sphharm;
pub mod supnorm;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision expansion.
pub type Expansion = sphharm::HarmonicExpansion<f64>;
pub type Expansion32 = sphharm::HarmonicExpansion<f32>;
