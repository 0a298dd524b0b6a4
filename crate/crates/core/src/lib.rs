//! Pseudospectral simulation and control of the coupled Schrödinger–KdV system on the torus.

pub mod bourgain;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod operators;
pub mod spectral;

pub use error::{Error, Result};
