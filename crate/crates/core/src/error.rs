//! Error type shared by all modules of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension-too-small: layout {layout} requires ambient dimension >= {required}, got {got}")]
    DimensionTooSmall {
        layout: &'static str,
        required: usize,
        got: usize,
    },

    #[error("infeasible-balance: ceil(beta*n/k) = {min_size} forces {} points but n = {n}", min_size * k)]
    InfeasibleBalance { min_size: usize, k: usize, n: usize },

    #[error("invalid-spec: {0}")]
    InvalidSpec(String),

    #[error("no-convergence: Jacobi SVD did not converge within {sweeps} sweeps")]
    SvdNoConvergence { sweeps: usize },

    #[error("non-finite-input: matrix contains NaN or infinite entries")]
    NonFiniteInput,

    #[error("rank-request-too-large: requested {requested} of {available} singular triples")]
    RankRequestTooLarge { requested: usize, available: usize },

    #[error("shape-mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("not-orthonormal: columns deviate from orthonormality by {deviation:e}")]
    NotOrthonormal { deviation: f64 },

    #[error("k-exceeds-n: k = {k} but only {n} points")]
    KExceedsN { k: usize, n: usize },

    #[error("instance-too-large: exact oracle limited to n <= {max_n}, k <= {max_k} (got n = {n}, k = {k})")]
    InstanceTooLarge {
        n: usize,
        k: usize,
        max_n: usize,
        max_k: usize,
    },

    #[error("empty-input-class: label class {class} has no members")]
    EmptyInputClass { class: usize },

    #[error("length-mismatch: label vectors of length {left} and {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("label-out-of-range: label {label} at position {index} not in 1..={k}")]
    LabelOutOfRange {
        label: u32,
        index: usize,
        k: usize,
    },

    #[error("zero-gap: singular value gap for block {a}:{b} is not positive")]
    ZeroGap { a: usize, b: usize },

    #[error("rank-deficient: sigma_{index} vanishes inside the requested block")]
    RankDeficient { index: usize },

    #[error("noise-model-not-isotropic: this check requires isotropic Gaussian noise")]
    NoiseModelNotIsotropic,

    #[error("insufficient-uncensored-points: need >= 2 grid points with positive mean loss, got {got}")]
    InsufficientUncensored { got: usize },
}
