//! Phase-field approximation of Griffith brittle-fracture energies on regular
//! grids, together with the constructive density machinery for GSBD fields:
//! cube lattices with good/bad nodes, rigid-affine fits with exceptional sets,
//! mollified patching and Nitsche reflection.

pub mod crack;
pub mod fields;
pub mod harness;
pub mod korn;
pub mod nitsche;
pub mod phasefield;
pub mod rough;
pub mod solver;
mod io_error;

pub use io_error::IoError;
