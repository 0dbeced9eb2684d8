//! Numerical laboratory for weighted-energy (Carleman) estimates of
//! first-order hyperbolic equations
//! `A0(x,t) d_t u + A(x,t) . grad u + p u = R f`.

pub mod carleman;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod inverse_coefficient;
pub mod inverse_source;
mod par;
pub mod sparse;

pub use error::{LabError, Result};
pub use grid::{GridFunction, Point, SpaceTimeGrid, SpatialDomain};
