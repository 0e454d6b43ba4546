//! Simplex random features and competing coupling schemes for Gaussian and
//! softmax kernel estimation, with closed-form variance analytics and a
//! benchmark harness.

pub mod analytics;
pub mod blocks;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod features;
pub mod linalg;
pub mod optimizer;
pub mod quad;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
