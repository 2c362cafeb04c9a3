//! Spectral clustering for isotropic Gaussian mixtures, with a Monte Carlo
//! harness that measures the permutation-minimized misclustering loss and
//! checks the supporting spectral perturbation facts at runtime.
//!
//! The pipeline: [`gmm`] samples instances `X = P + E` with prescribed
//! center separation and cluster balance, [`spectral`] clusters them by
//! singular-value-weighted projection plus k-means ([`kmeans`]), [`metrics`]
//! scores label vectors against the truth, [`verify`] checks population
//! structure and perturbation bounds, and [`harness`] drives seeded sweeps
//! and fits the decay rate of the loss in the separation.

pub mod error;
pub mod gmm;
pub mod harness;
pub mod kmeans;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
