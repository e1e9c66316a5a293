//! Constant Gaussian curvature surfaces in the 3-sphere, pseudospherical
//! surfaces in Euclidean 3-space and their flat limits, constructed from
//! pairs of loop-algebra potentials by the generalized d'Alembert method
//! and cross-checked with independent finite-difference oracles.

pub mod cli;
pub mod dalembert;
pub mod error;
pub mod export;
pub mod geometry;
pub mod loop_algebra;
pub mod mat2;
pub mod potentials;
pub mod projections;

pub use error::{Error, Result};
