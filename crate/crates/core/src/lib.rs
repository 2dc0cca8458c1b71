//! Finite-element simulation that mixes a high-fidelity elasto-plastic
//! material with a Gaussian-process surrogate, choosing per integration point
//! through an uncertainty-driven phase field or a local rule.

pub mod cli;
pub mod config;
pub mod driver;
pub mod error;
pub mod fem;
pub mod fixtures;
pub mod gp;
pub mod material;
pub mod mesh;
pub mod metrics;
pub mod mixture;
pub mod phasefield;
pub mod vtk;

pub use error::{Error, Result};
