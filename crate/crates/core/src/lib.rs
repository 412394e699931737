//! Aharonov-Bohm effect laboratory.
//!
//! Planar scenes of disk obstacles carrying hidden magnetic fluxes, gauge
//! phases along straight and broken rays, the leading-order two-beam
//! interference law, a gauge-covariant lattice Schrödinger solver that checks
//! those predictions, the electric effect in domains that split and merge in
//! time, and recovery of the fluxes modulo 2π from interference data.

pub mod electric;
pub mod error;
pub mod gauge;
pub mod geometry;
pub mod optics;
pub mod path;
pub mod quadrature;
pub mod recovery;
pub mod tdse;
pub mod vec2;

pub use error::{Error, Result};
pub use gauge::{PhysicalConstants, VectorPotential};
pub use geometry::{BrokenRay, Disk, Scene};
pub use path::{Loop, Path, Segment};
pub use vec2::Vec2;
