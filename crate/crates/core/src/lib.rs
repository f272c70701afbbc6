//! Point-charge electrostatics in R^d.
//!
//! Coulomb/Riesz potentials and energies, the Onsager bound, equilibrium
//! residuals and solvers, the planar moment identities, critical points of
//! three-dimensional fields, and a nonnegative moment-matching experiment
//! for signed measures in the unit ball.

pub mod cli;
pub mod config;
pub mod equilibrium;
pub mod error;
pub mod faraday;
pub mod fields;
pub mod kernel;
pub mod maxwell;
pub mod moments;
pub mod onsager;

pub use config::{
    build_configuration, pairwise_distance_matrix, ChargeConfiguration, ComponentPartition,
    PointCharge, SpacePoint,
};
pub use error::{Error, Result};
pub use kernel::{InteractionLaw, KernelSpec, LawLabel};
