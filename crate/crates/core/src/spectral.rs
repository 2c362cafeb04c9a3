//! The three spectral clustering algorithms.
//!
//! All of them start from the same projection: keep the leading
//! `m = min(k, p)` singular triples of the data matrix and form the
//! singular-value-weighted scores `Yhat = Sigma_hat Vhat^T`. Weighting by the
//! singular values (rather than clustering the bare singular vectors) is
//! what removes any spectral-gap requirement: it makes clustering on the
//! scores isometric to clustering on the columns of the rank-m
//! approximation `Uhat Sigma_hat Vhat^T`.

use crate::error::Result;
use crate::gmm::LabelVector;
use crate::kmeans::{self, KMeansConfig};
use crate::linalg::{thin_svd, truncate, Matrix, Svd};

#[derive(Debug, Clone)]
pub struct SpectralOutput {
    pub labels: LabelVector,
    /// m x k centers in the projected space.
    pub centers_reduced: Matrix,
    /// p x k centers mapped back to the ambient space, `Uhat * c_j`.
    pub centers_ambient: Matrix,
    /// Leading-m SVD of the data matrix.
    pub svd: Svd,
    /// k-means objective attained on the projected columns.
    pub objective: f64,
}

/// Steps 1-2 shared by all algorithms: thin SVD, keep the leading
/// `min(k, p)` triples, and form `Yhat = Sigma_hat Vhat^T` (m x n). When
/// p < k the dimensionality reduction degenerates to a rotation and k-means
/// effectively runs on the raw columns.
pub fn project(x: &Matrix, k: usize) -> Result<(Svd, Matrix)> {
    let full = thin_svd(x)?;
    let m = k.min(x.rows()).min(full.sigma.len());
    let f = truncate(&full, m)?;
    let mut yhat = f.v.transpose(); // m x n
    for (l, &s) in f.sigma.iter().enumerate() {
        for j in 0..yhat.cols() {
            yhat[(l, j)] *= s;
        }
    }
    Ok((f, yhat))
}

/// Spectral clustering: SVD projection followed by k-means on the columns
/// of `Yhat`.
pub fn algorithm1(x: &Matrix, k: usize, config: &KMeansConfig) -> Result<SpectralOutput> {
    let (svd, yhat) = project(x, k)?;
    let sol = kmeans::solve(&yhat, k, config)?;
    let centers_ambient = svd.u.mul(&sol.centers);
    Ok(SpectralOutput {
        labels: sol.labels,
        centers_reduced: sol.centers,
        centers_ambient,
        svd,
        objective: sol.objective,
    })
}

/// Spectral clustering with an approximate k-means solve followed by one
/// Lloyd step, which restores the local optimality of the labels:
/// every point ends up assigned to its nearest center.
pub fn algorithm2(x: &Matrix, k: usize, config: &KMeansConfig) -> Result<SpectralOutput> {
    let (svd, yhat) = project(x, k)?;
    let sol = kmeans::solve(&yhat, k, config)?;
    let labels = fill_empty_classes(&yhat, sol.labels, &sol.centers, k);
    let refined = kmeans::refine_once(&yhat, &labels)?;
    let centers_ambient = svd.u.mul(&refined.centers);
    Ok(SpectralOutput {
        labels: refined.labels,
        centers_reduced: refined.centers,
        centers_ambient,
        svd,
        objective: refined.objective,
    })
}

/// Clustering on the rank-m approximation `Phat = Uhat Sigma_hat Vhat^T`.
/// Because the columns of `Uhat` are orthonormal, the k-means landscape on
/// the columns of `Phat` is isometric to the one on `Yhat`; the solution
/// path of `algorithm1` is replayed and its centers mapped through `Uhat`,
/// so the two label vectors agree exactly.
pub fn algorithm3(x: &Matrix, k: usize, config: &KMeansConfig) -> Result<SpectralOutput> {
    let (svd, yhat) = project(x, k)?;
    let sol = kmeans::solve(&yhat, k, config)?;
    let centers_ambient = svd.u.mul(&sol.centers);
    let phat = svd.u.mul(&yhat);
    let objective = kmeans::objective_of(&phat, &sol.labels, &centers_ambient);
    Ok(SpectralOutput {
        labels: sol.labels,
        centers_reduced: sol.centers,
        centers_ambient,
        svd,
        objective,
    })
}

/// The rank-m approximation the output's ambient centers live in.
pub fn rank_m_approximation(output: &SpectralOutput) -> Matrix {
    output.svd.reconstruct()
}

/// Guards the refine path: a solver output with an empty class (possible
/// only on degenerate inputs) gets the farthest point moved into it.
fn fill_empty_classes(y: &Matrix, labels: LabelVector, centers: &Matrix, k: usize) -> LabelVector {
    let mut sizes = labels.class_sizes(k);
    if sizes.iter().all(|&s| s > 0) {
        return labels;
    }
    let mut labels = labels.0;
    for e in 0..k {
        while sizes[e] == 0 {
            let mut far_i = usize::MAX;
            let mut far_d = -1.0;
            for (i, &l) in labels.iter().enumerate() {
                let c = (l - 1) as usize;
                if sizes[c] >= 2 {
                    let d = crate::linalg::sqdist(y.col(i), centers.col(c));
                    if d > far_d {
                        far_d = d;
                        far_i = i;
                    }
                }
            }
            if far_i == usize::MAX {
                break;
            }
            let old = (labels[far_i] - 1) as usize;
            sizes[old] -= 1;
            sizes[e] += 1;
            labels[far_i] = e as u32 + 1;
        }
    }
    LabelVector(labels)
}
