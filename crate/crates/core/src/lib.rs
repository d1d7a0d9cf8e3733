//! Numerical laboratory for the MHD boundary-layer equations in Gevrey
//! classes: tangentially regularized IMEX solver, auxiliary-function
//! construction, Gevrey seminorms, and cancellation-identity diagnostics.

pub mod auxiliary;
pub mod cli;
pub mod checkpoint;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod gevrey;
pub mod grid;
pub mod initial;
pub mod output;
pub mod series;
pub mod solver;
pub mod state;

pub use error::{Error, Result};
pub use field::Field;
pub use grid::{DomainConfig, Grid};
pub use solver::{SolverConfig, Trajectory};
pub use state::State;
