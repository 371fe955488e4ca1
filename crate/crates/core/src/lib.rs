//! Numerical solvers for a KZK-type equation with a turbulent convection
//! field: an exponential Runge–Kutta/WENO5 integrator and a Lie splitting
//! baseline, plus the grid, turbulence and analysis tooling around them.

pub mod analysis;
pub mod error;
pub mod exprk;
pub mod grid;
pub mod io;
pub mod phi;
pub mod run;
pub mod spectral;
pub mod splitting;
pub mod turbulence;
pub mod weno;

pub use error::{Error, Result};
pub use grid::{DomainConfig, Field2D, GridSet, Interval, RhoBoundary};
pub use run::{CflPolicy, RunOptions, RunOutput, StepTiming};
