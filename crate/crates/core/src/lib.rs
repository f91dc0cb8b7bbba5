//! Applicability-domain benchmarking for regression models.
//!
//! The crate is organised as a pipeline: [`dataset`] loads and prepares
//! tables, [`models`] fits regressors, [`measures`] turns fitted training
//! context into per-point AD values, and [`validation`] ranks those values
//! by how well they order prediction errors.

pub mod dataset;
pub mod error;
pub mod measures;
pub mod models;
pub mod rng;
pub mod validation;

pub use error::{Error, Result};
