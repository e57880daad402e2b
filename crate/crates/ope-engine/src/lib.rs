//! Perturbative operator product expansion engine.

pub mod algebra;
pub mod error;

pub use error::{OpeError, Result};
pub mod covariance;
pub mod quadrature;
pub mod wick;
pub mod recursion;
pub mod ward;
pub mod trees;
pub mod analysis;
pub mod cli;
