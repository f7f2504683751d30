//! Convergence studies, method comparisons and field dumps for the plane-wave DG
//! grating solver.

pub mod config;
pub mod error;
pub mod run;
pub mod scenario;

pub use config::{Method, RawConfig, RunConfig, Scenario};
pub use error::{HarnessError, Result};
