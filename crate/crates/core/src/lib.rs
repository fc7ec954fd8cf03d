//! Dynamics of a seasonally forced SIR model with logistic susceptible
//! growth and saturated treatment.
//!
//! The crate covers the autonomous analysis (closed-form equilibria,
//! thresholds, stability, bifurcation and regime detection), time
//! integration of the full, reduced and extended vector fields, and the
//! numerical tools used to look for strange attractors once the seasonal
//! forcing is switched on: stroboscopic maps, Lyapunov exponents, limit
//! cycle shooting and parameter sweeps.

// validation uses `!(x > 0.0)` on purpose so NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attractor;
pub mod equilibria;
pub mod error;
pub mod integrate;
pub mod linalg;
pub mod model;
pub mod sweep;

pub use error::{Error, Result};
