//! Simulation engine for nonautonomous slow-fast stochastic PDEs under spectral Galerkin
//! truncation, with tools to check the strong averaging principle numerically.

pub mod error;
pub mod average;
pub mod coeffs;
pub mod ergodic;
pub mod harness;
pub mod integrate;
pub mod spaces;
pub mod stats;

pub use error::{Error, Result};
