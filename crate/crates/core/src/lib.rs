//! Numerical toolkit for reproducing-kernel families in de Branges–Rovnyak
//! and model spaces on the upper half-plane.

pub mod error;
pub mod quad;
pub mod linalg;
pub mod schur;
pub mod kernels;
pub mod aos;
pub mod carleson;
pub mod stability;
pub mod exponentials;
pub mod projection;

pub use error::{Error, Result};
pub use schur::SchurFunction;
