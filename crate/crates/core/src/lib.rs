//! Hopf bifurcations, Poincaré–Lindstedt series and periodic-orbit continuation
//! for a two-delay activator–inhibitor system.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bvp;
pub mod continuation;
pub mod error;
pub mod fourier;
pub mod hopf;
pub mod integrator;
pub mod lindstedt;
pub mod model;
pub mod par;
pub mod taylor;

pub use error::{Error, Result};
