//! Small self-contained numerical kernels shared across the crate.

pub mod assignment;
pub mod gauss_hermite;
pub mod linalg;
pub mod quad;
pub mod stats;
