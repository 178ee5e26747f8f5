//! Certified POD reduced-order modelling of a rotating 2D magnetostatic machine model.
//!
//! The pipeline: [`machine::MachineSpec`] describes a surrogate permanent-magnet
//! machine, [`mesh`] triangulates it on a polar grid whose rotor turns by index
//! shifts, [`fem`] assembles the block system and its affine decomposition,
//! [`pod`] builds stator and rotor bases and the reduced model, [`certify`]
//! bounds the reduced error, [`adaptive`] grows the snapshot set greedily and
//! [`bench`] runs the named perturbation scenarios.

pub mod adaptive;
pub mod bench;
pub mod certify;
pub mod cli;
pub mod eigen;
pub mod error;
pub mod fem;
pub mod io;
pub mod machine;
pub mod mesh;
pub mod pod;
pub mod sparse;
pub mod weight;

pub use error::{Error, Result};
