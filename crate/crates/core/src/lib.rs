//! Clutter mitigation for spatial-modulation joint radar-communication
//! systems: transmit beampattern design, slow-time scene simulation, analytic
//! clutter covariance, power-method clutter subspace extraction and the
//! reduced-dimension STAP chain with its baseline filters.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod beamformer;
pub mod covariance;
pub mod eigen;
pub mod error;
pub mod harness;
pub mod scene;
pub mod stap;

pub use error::{ConfigIssue, Error, Result};
