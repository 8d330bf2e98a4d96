//! Numerical laboratory for very weak solutions of Schrödinger-type Cauchy
//! problems with distributional coefficients.

pub mod cli;
pub mod cplx;
pub mod dist_catalog;
pub mod error;
pub mod gausspoly;
pub mod grid_field;
pub mod mollifier;
pub mod pde_solver;
pub mod psido;
pub mod quad;
pub mod smooth;
pub mod taylor;
pub mod time_curve;
pub mod vws_harness;

pub use error::{Error, Result};
