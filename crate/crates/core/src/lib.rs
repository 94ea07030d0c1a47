//! Simulation and numerical verification of perturbed contact models.
//!
//! The crate is organised around an immutable [`model::DerivedModel`]
//! built from a [`model::ModelSpec`]; samplers, estimators and solvers
//! read from it.

// `!(x > 0.0)` guards deliberately reject NaN; per-axis index loops over
// fixed-size coordinate arrays read better than zipped iterators.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod conditions;
pub mod config;
pub mod feynman_kac;
pub mod field;
pub mod fixtures;
pub mod hierarchy;
pub mod jump;
pub mod model;
pub mod particles;
pub mod rng;
pub mod stats;

/// Crate version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
