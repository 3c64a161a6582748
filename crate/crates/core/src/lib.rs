//! Spectral clustering for stochastic block models with data-driven
//! regularization.

pub mod clustering;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod laplacian;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod par;
pub mod rng;
pub mod tuning;

pub use error::{Error, Result};
