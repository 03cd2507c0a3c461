//! Multivariate B(φ) spaces of random vectors with exponentially decreasing
//! tails: Young functions, numerical conjugates, norm estimation, tail bounds
//! for single vectors and sums, and monotonicity characterisation checks.

pub mod bounds;
pub mod characterize;
pub mod conjugate;
pub mod empirical;
pub mod error;
pub mod logspace;
pub mod maximize;
pub mod mgf;
pub mod norms;
pub mod quasi;
pub mod signs;
pub mod young;

pub use error::{Error, Result};
