//! Neural surrogates for parametric integrals trained on single-realization
//! Monte Carlo labels, with and without differential (pathwise gradient)
//! supervision.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod fileio;
pub mod harness;
pub mod network;
pub mod preprocessing;
pub mod plot;
pub mod problems;
pub mod quadrature;
pub mod sampling;
pub mod specfun;
pub mod training;

pub use error::{Error, Result};
