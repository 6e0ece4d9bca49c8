//! Numerical laboratory for boundary-datum frequencies and interior decay of
//! solutions to 2D divergence-form elliptic equations.
//!
//! The pipeline is: build a [`geometry::Domain`] and its [`geometry::Mesh`],
//! pick a conductivity and a metric from [`coefficients`], assemble the
//! weighted Dirichlet form in [`fem`], compute Dirichlet-to-Neumann data and
//! Steklov spectra in [`spectral`], and profile the solution across the level
//! sets of the distance to the boundary in [`decay`]. Closed-form unit-disk
//! references live in [`oracle`].

pub mod cli;
pub mod coefficients;
pub mod decay;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod mat2;
pub mod oracle;
pub mod spectral;

pub use error::{Error, Result};
pub use mat2::Sym2;

/// A point (or vector) in the plane.
pub type Point = [f64; 2];
