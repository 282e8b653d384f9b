//! Finite-difference solver for the regularized parabolic p-Laplacian system
//! with mollified convection, together with the audits that check its energy
//! bounds, maximum principle (via a dual problem), mollifier properties,
//! monotonicity gaps and operator certificates.

// `!(x > 0.0)` style guards are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod bank;
pub mod cascade;
pub mod dual;
pub mod error;
mod linalg;
pub mod mesh;
pub mod mollify;
pub mod operators;
pub mod presets;
pub mod solver;
pub mod suites;

pub use error::{PlapError, Result};
