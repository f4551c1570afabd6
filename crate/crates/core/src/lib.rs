//! Exact-increment descent for stochastic optimal control on the circle.

pub mod cli;
pub mod descent;
pub mod error;
pub mod montecarlo;
pub mod problem;
pub mod spectral;
pub mod theta;

pub use error::{Error, Result};
