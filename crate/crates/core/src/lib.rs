//! Closed-form geometric Lorenz flow, the explicit non-shadowable pseudo-orbit
//! and a harness that searches for shadowing orbits and certifies the floor.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod falsifier;
pub mod geometry;
pub mod model;
pub mod pseudo_orbit;
pub mod shadowing;

pub use error::{Error, Result};
pub use geometry::Vec3;
pub use model::{Case, HybridState, ModelParams, RegionTag};
pub use pseudo_orbit::{verify_classes, ClassReport, PseudoOrbit};
pub use shadowing::{beta_for, floor_for, Reparam, Shadower};
pub use falsifier::{minimize_functional, verify_floor, SearchOptions, ShadowReport, Witness};
