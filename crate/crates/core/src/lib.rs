//! Robust Stackelberg control of incompressible 2D flow on a staggered grid.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod carleman_weights;
pub mod error;
pub mod grid_fields;
pub mod harness_cli;
pub mod leader_control;
pub(crate) mod linalg;
pub mod robust_saddle;
pub mod stokes_core;

pub use error::{Error, Result};
