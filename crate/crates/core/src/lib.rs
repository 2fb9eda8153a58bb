//! Time-harmonic eddy-current solver for steam-generator tube inspection.
//!
//! The crate discretizes the coupled magnetic vector potential / electric
//! scalar potential (A–V) formulation with a Coulomb-gauge penalty on
//! tetrahedral P1 nodal elements, assembles the 2×2 complex block system per
//! mesh partition, factorizes it once per material configuration and then
//! sweeps a two-coil probe along the tube axis, reducing each position to the
//! absolute (`Z_FA`) and differential (`Z_F3`) impedance signals.
//!
//! Pipeline, in module order:
//!
//! - [`mesh`]: tetrahedral meshes, Gmsh I/O, the parametric tube generator
//! - [`partition`]: balanced dual-graph partitioning of the tetrahedra
//! - [`element`] / [`assembly`]: element forms, per-part assembly, reduction,
//!   boundary penalization and source terms
//! - [`solver`]: sparse direct LU (factor once, solve many) and ILU-GMRES
//! - [`signals`]: electric field, skin depth, coil impedance variations
//! - [`scan`]: the probe sweep driver and its CSV trace format
//! - [`config`] / [`cli`]: run configuration and the command-line front end

pub mod assembly;
pub mod cli;
pub mod config;
pub mod element;
pub mod error;
pub mod mesh;
pub mod partition;
pub mod scan;
pub mod signals;
pub mod solver;
pub mod sparse;
pub mod workers;

pub use num_complex::Complex64 as C64;

pub use error::{Error, Result};

/// Vacuum permeability in H/m.
pub const MU_0: f64 = 4.0e-7 * std::f64::consts::PI;
