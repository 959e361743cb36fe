//! Two-stage ranking and selection with covariates.
//!
//! Alternatives are sampled at a fixed set of design points, a linear model is
//! fitted per alternative, and the resulting decision rule picks the best
//! alternative for any covariate value observed later.

pub mod constants;
pub mod design;
pub mod error;
pub mod evaluation;
pub mod numerics;
pub mod problems;
pub mod procedures;

pub use error::{Error, Result};
