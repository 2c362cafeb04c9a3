//! Dense linear algebra: matrix storage, thin SVD, norms, projector
//! distances.

mod matrix;
mod svd;

pub use matrix::{dot, format_g17, sqdist, Matrix};
pub use svd::{operator_norm, projector_distance, thin_svd, truncate, Svd};
