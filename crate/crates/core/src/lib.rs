//! Isogeometric 2D nonlinear magnetostatics of a permanent-magnet synchronous
//! machine with harmonic rotor–stator coupling, adjoint shape sensitivities and
//! gradient-based design optimization.

pub mod assembly;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod materials;
pub mod model;
pub mod optimize;
pub mod quadrature;
pub mod sensitivity;
pub mod solver;
pub mod splines;

pub use error::{Error, Result};
