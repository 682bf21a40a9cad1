//! Ergodic surface coverage on point clouds.
//!
//! The pipeline has three stages:
//!
//! * preprocessing: a point-cloud Laplace–Beltrami operator ([`laplacian`])
//!   and its truncated eigenbasis ([`spectral`]);
//! * coverage: a virtual disk-shaped agent projected onto locally fitted
//!   conformal primitives ([`cga`]) that climbs the gradient of a diffused
//!   coverage deficit ([`coverage`]);
//! * control: a task-space impedance law expressed with motors, twists and
//!   wrenches ([`control`]), evaluated kinematically.
//!
//! [`harness`] ties the stages into reproducible scenarios, sweeps and
//! timing benchmarks.

pub mod cga;
pub mod control;
pub mod coverage;
pub mod error;
pub mod fixtures;
pub mod harness;
pub mod kdtree;
pub mod laplacian;
pub mod pointcloud;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};

/// Euclidean 3-vector, millimetres unless stated otherwise.
pub type Vec3 = nalgebra::Vector3<f64>;
