//! Piecewise-continuous decomposition of one-dimensional signals.

pub mod calculus;
pub mod decompose;
pub mod error;
pub mod expr;
pub mod layout;
pub mod models;
pub mod optimizer;
pub mod signal;

pub use error::{Error, Result};
