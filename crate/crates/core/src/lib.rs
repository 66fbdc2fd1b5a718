//! Trace finite element simulation of two-phase incompressible flow on closed surfaces.

pub mod config;
pub mod cut;
pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod fe;
pub mod forms;
pub mod geometry;
pub mod materials;
pub mod mesh;
pub mod output;
pub mod quadrature;
pub mod scenarios;
pub mod solver;
pub mod sparse;
pub mod stepper;
pub mod surface;

pub use error::{Error, Result};
