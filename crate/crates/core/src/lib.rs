//! Backward Kolmogorov solvers and Monte Carlo estimators for the
//! stochastic elasto-plastic and obstacle oscillators.

pub mod error;
pub mod grid;
pub mod harness;
pub mod mc;
pub mod model;
pub mod operators;
pub mod pde;
pub mod sparse;
pub mod superposition;

pub use error::{Error, Result};
