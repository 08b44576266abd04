//! Near-field channel laboratory for large virtual linear arrays.
//!
//! The crate synthesizes spherical-wave multipath channels over a swept
//! frequency band, extracts per-element channel characteristics, divides
//! the array into stationary intervals and measures how well a
//! multiplanar-wave approximation tracks the spherical ground truth.
//!
//! Module map:
//! - [`scene`]: scenario model, file format, exact geometry and occlusion
//! - [`wavefront`]: closed-form path-difference and phase model
//! - [`synth`]: path enumeration and channel frequency response synthesis
//! - [`analysis`]: delay profiles, power, delay spread, LOS phase and AoD
//! - [`stationarity`]: correlation-matrix-distance and slope partitioning
//! - [`mwmodel`]: multiplanar-wave reconstruction and its error
//!
//! Element indices are 1-based everywhere in the public API; element 1 is
//! the phase reference.

pub mod analysis;
pub mod error;
pub mod mwmodel;
pub mod scene;
pub mod stationarity;
pub mod synth;
pub mod wavefront;

pub use error::{Error, Result};

pub use num_complex::Complex64;

/// 3-vector in meters.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Transmit power that maps to the 0 dB amplitude reference of a CFR.
pub const TX_POWER_DBM: f64 = 10.0;
