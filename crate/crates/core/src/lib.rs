//! Coupled brain electrophysiology and metabolism under ischemia.
//!
//! A cell-scale ionic + metabolic ODE model embedded in the monodomain
//! equation, discretized in space with a p-adaptive symmetric interior
//! penalty discontinuous Galerkin method on polygonal meshes and in time
//! with Crank-Nicolson plus second-order explicit extrapolation of the
//! ionic term. Scenario files drive both the space-free cell studies and
//! the 2D tissue experiments.

pub mod config;
pub mod cell;
pub mod diag;
pub mod equilibrium;
pub mod error;
pub mod ionic;
pub mod metabolic;
pub mod parallel;
pub mod params;
pub mod spikes;
pub mod tensor;

pub use error::{Error, Result};
pub use params::Params;
