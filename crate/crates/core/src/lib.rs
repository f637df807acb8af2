//! Finite-volume solver for the unipolar degenerate drift-diffusion-Poisson model.

pub mod assembly;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod fluxes;
pub mod linear;
pub mod mesh;
pub mod physics;
pub mod runs;
pub mod solver;

pub use error::{DdfvError, Result};
pub use fluxes::SchemeKind;
pub use mesh::AdmissibleMesh;
