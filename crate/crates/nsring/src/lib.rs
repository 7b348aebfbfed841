//! Numerical pipeline for an unstable vortex ring: two-dimensional vortex
//! instability, its continuation to axisymmetric rings and self-similar
//! Navier-Stokes variables, the unstable-manifold fixed point and the
//! resulting pair of distinct forced solutions.

pub mod axisym;
pub mod config;
pub mod error;
pub mod euler2d;
pub mod io;
pub mod manifold;
pub mod numerics;
pub mod physical;
pub mod pipeline;
pub mod profiles;
pub mod selfsim;

pub use error::{Error, Result};
pub use faer::c64;
