//! Simulation and metrology toolkit for the continuously monitored open
//! quantum Rabi model near its dissipative critical point.

pub mod dynamics;
pub mod error;
pub mod inference;
pub mod models;
pub mod quantum;
pub mod scaling;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
