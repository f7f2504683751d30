//! Plane-wave discontinuous Galerkin discretisation of the Helmholtz equation on
//! periodic gratings, with impedance and quasi-periodic DtN boundary treatments.

pub mod assembly;
pub mod basis;
pub mod dtn;
pub mod error;
pub mod geometry;
pub mod mesh_io;
pub mod mesher;
pub mod oracles;
pub mod quadrature_assembly;
pub mod solve;

pub use error::{Error, Result};
