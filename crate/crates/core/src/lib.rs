//! Event-driven simulation and grazing-bifurcation analysis of the forced
//! PP04 glacial-cycle model, treated as a piecewise-linear Filippov system.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg3`]: fixed-size 3×3 linear algebra (eigen-decomposition, matrix
//!   exponential, complex resolvent).
//! * [`model`]: parameters, forcing, the switching function and the closed-form
//!   pieces of the flow.
//! * [`flow`]: exact event-driven propagation and a smoothed-system integrator.
//! * [`orbits`]: stroboscopic Poincaré map, attractor classification, periodic
//!   orbit polishing and the square-root probe.
//! * [`grazing`]: analytic grazing times, grazing initial conditions and leaves.
//! * [`scan`]: parallel parameter sweeps, tongue maps, basin grids.

// Index loops mirror the matrix algebra; negated comparisons are used on
// purpose so that NaN fails validation.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod error;
pub mod flow;
pub mod grazing;
pub mod io;
pub mod linalg3;
pub mod model;
pub mod orbits;
pub mod roots;
pub mod scan;

pub use error::{Error, Result};
pub use linalg3::{Mat3, Vec3};
pub use model::{build_system, Forcing, ForcingTerm, ModelParams, RegionLabel, StateVec, SystemReal};
