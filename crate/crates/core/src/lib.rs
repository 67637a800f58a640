//! Numerical verification toolkit for the similarity criterion of
//! Cowen–Douglas operators to the backward shift on the Dirichlet space.
//!
//! The crate is organised bottom-up:
//!
//! - [`wirtinger`]: `∂`, `∂̄` and the normalized Laplacian by central differences
//! - [`kernel`]: closed forms and series for the Dirichlet kernel family
//! - [`coeff_space`]: the truncated space in orthonormal coordinates
//! - [`bundle`]: eigenvector-bundle projections and their HS derivative norms
//! - [`green`]: Green potentials and boundedness scans on the disk
//! - [`model`]: Müller model quantities and numerical eigenspaces
//! - [`similarity`]: the end-to-end criterion pipeline
//! - [`cli`]: the `dshift` command-line surface

pub mod bundle;
pub mod cli;
pub mod coeff_space;
pub mod error;
pub mod exec;
pub mod green;
pub mod kernel;
pub mod model;
pub mod similarity;
pub mod wirtinger;

pub use error::{Error, Result};
pub use wirtinger::{DiskPoint, ScalarField, StepSpec};

/// Largest modulus accepted by truncation- and stencil-based bundle routines.
pub const DEFAULT_R_MAX: f64 = 0.95;
