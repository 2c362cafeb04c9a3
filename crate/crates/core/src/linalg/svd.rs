//! Thin singular value decomposition via one-sided Jacobi.
//!
//! The kernel orthogonalizes the columns of the short side of the matrix with
//! cyclic Givens sweeps. It is deterministic for identical input bytes and
//! accurate to close to machine precision at desk scale, which is what the
//! perturbation checks in this crate need.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::matrix::{dot, Matrix};

/// Rotations stop once every off-diagonal inner product is below this,
/// relative to the column norms.
const JACOBI_TOL: f64 = 1e-12;
/// Sweep budget; exceeding it signals a pathological input.
const SWEEP_BUDGET: usize = 60;

/// Thin SVD factors `M = U diag(sigma) V^T`.
///
/// `U` has orthonormal columns (`rows x r`), `V` likewise (`cols x r`),
/// `sigma` is nonincreasing and nonnegative, `r = min(rows, cols)` unless
/// truncated. Sign convention: in each column of `U` the entry of largest
/// magnitude is nonnegative (ties broken by lowest row index), with the
/// matching column of `V` flipped to compensate.
#[derive(Debug, Clone, Serialize)]
pub struct Svd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    pub fn rank_triples(&self) -> usize {
        self.sigma.len()
    }

    /// `U diag(sigma) V^T`
    pub fn reconstruct(&self) -> Matrix {
        let mut sv = self.v.clone().transpose();
        for (l, &s) in self.sigma.iter().enumerate() {
            for j in 0..sv.cols() {
                sv[(l, j)] *= s;
            }
        }
        self.u.mul(&sv)
    }

    /// Number of singular values above `rel_tol * sigma_1`.
    pub fn numerical_rank(&self, rel_tol: f64) -> usize {
        let s1 = self.sigma.first().copied().unwrap_or(0.0);
        if s1 == 0.0 {
            return 0;
        }
        self.sigma.iter().take_while(|&&s| s > rel_tol * s1).count()
    }
}

/// Orthogonalizes the columns of `w` in place; accumulates the rotations in
/// `j` when given. Returns Err on sweep-budget exhaustion.
///
/// Column norms are refreshed once per sweep and kept exact through the
/// rotation pass, so each pair costs one inner-product pass plus the
/// rotation itself. Columns whose norm falls to rounding level relative to
/// the matrix are deflated to exact zero; without this, the relative
/// rotation threshold cycles forever on rank-deficient inputs.
fn jacobi_orthogonalize(w: &mut Matrix, mut j: Option<&mut Matrix>) -> Result<()> {
    let c = w.cols();
    let zero_level2 = {
        let f = w.frobenius_norm() * f64::EPSILON * 4.0;
        f * f
    };
    let mut norms2 = vec![0.0f64; c];
    for _ in 0..SWEEP_BUDGET {
        for col in 0..c {
            let nrm2 = dot(w.col(col), w.col(col));
            if nrm2 > 0.0 && nrm2 <= zero_level2 {
                for x in w.col_mut(col) {
                    *x = 0.0;
                }
                norms2[col] = 0.0;
            } else {
                norms2[col] = nrm2;
            }
        }
        let mut rotated = 0usize;
        for p in 0..c {
            for q in (p + 1)..c {
                let apq = dot(w.col(p), w.col(q));
                if apq.abs() <= JACOBI_TOL * (norms2[p] * norms2[q]).sqrt() {
                    continue;
                }
                rotated += 1;
                let zeta = (norms2[q] - norms2[p]) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cos = 1.0 / (1.0 + t * t).sqrt();
                let sin = cos * t;
                let (np, nq) = w.rotate_cols_tracked(p, q, cos, sin);
                norms2[p] = np;
                norms2[q] = nq;
                if let Some(acc) = j.as_deref_mut() {
                    acc.rotate_cols(p, q, cos, sin);
                }
            }
        }
        if rotated == 0 {
            return Ok(());
        }
    }
    Err(Error::SvdNoConvergence {
        sweeps: SWEEP_BUDGET,
    })
}

/// Thin SVD with `min(rows, cols)` triples.
pub fn thin_svd(m: &Matrix) -> Result<Svd> {
    if !m.is_finite() {
        return Err(Error::NonFiniteInput);
    }
    let transposed = m.rows() < m.cols();
    let mut w = if transposed { m.transpose() } else { m.clone() };
    let c = w.cols(); // c = min(rows, cols)
    let mut acc = Matrix::identity(c);
    jacobi_orthogonalize(&mut w, Some(&mut acc))?;

    // Column norms are the singular values; sort nonincreasing (stable).
    let mut order: Vec<usize> = (0..c).collect();
    let norms: Vec<f64> = (0..c).map(|j| dot(w.col(j), w.col(j)).sqrt()).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap());

    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let mut left = Matrix::zeros(w.rows(), c);
    let mut right = Matrix::zeros(c, c);
    let mut pending_completion: Vec<usize> = Vec::new();
    for (out, &src) in order.iter().enumerate() {
        right.set_col(out, acc.col(src));
        if norms[src] == 0.0 {
            pending_completion.push(out);
        } else {
            let inv = 1.0 / norms[src];
            let dst = left.col_mut(out);
            for (d, s) in dst.iter_mut().zip(w.col(src)) {
                *d = s * inv;
            }
        }
    }
    complete_basis(&mut left, &pending_completion);

    let (mut u, mut v) = if transposed {
        (right, left)
    } else {
        (left, right)
    };
    apply_sign_convention(&mut u, &mut v);
    Ok(Svd { u, sigma, v })
}

/// Fills the listed zero columns with orthonormal vectors orthogonal to all
/// other columns, built deterministically from standard basis vectors.
fn complete_basis(m: &mut Matrix, targets: &[usize]) {
    if targets.is_empty() {
        return;
    }
    let rows = m.rows();
    let mut next_e = 0usize;
    for &t in targets {
        loop {
            assert!(next_e < rows, "basis completion exhausted");
            let mut r = vec![0.0; rows];
            r[next_e] = 1.0;
            next_e += 1;
            // project out every other (already unit) column, twice for stability
            for _ in 0..2 {
                for j in 0..m.cols() {
                    if j == t {
                        continue;
                    }
                    let cj = m.col(j);
                    let coef = dot(&r, cj);
                    for i in 0..rows {
                        r[i] -= coef * cj[i];
                    }
                }
            }
            let nrm = dot(&r, &r).sqrt();
            if nrm > 0.5 {
                for x in r.iter_mut() {
                    *x /= nrm;
                }
                m.set_col(t, &r);
                break;
            }
        }
    }
}

fn apply_sign_convention(u: &mut Matrix, v: &mut Matrix) {
    for j in 0..u.cols() {
        let col = u.col(j);
        let mut best = 0usize;
        let mut best_abs = col[0].abs();
        for (i, &x) in col.iter().enumerate().skip(1) {
            if x.abs() > best_abs {
                best_abs = x.abs();
                best = i;
            }
        }
        if u[(best, j)] < 0.0 {
            for i in 0..u.rows() {
                u[(i, j)] = -u[(i, j)];
            }
            for i in 0..v.rows() {
                v[(i, j)] = -v[(i, j)];
            }
        }
    }
}

/// Keeps the leading `m` singular triples.
pub fn truncate(f: &Svd, m: usize) -> Result<Svd> {
    if m == 0 || m > f.sigma.len() {
        return Err(Error::RankRequestTooLarge {
            requested: m,
            available: f.sigma.len(),
        });
    }
    Ok(Svd {
        u: f.u.take_cols(m),
        sigma: f.sigma[..m].to_vec(),
        v: f.v.take_cols(m),
    })
}

/// Largest singular value. Runs the same Jacobi sweep as [`thin_svd`] without
/// accumulating singular vectors, so the value is identical.
pub fn operator_norm(m: &Matrix) -> Result<f64> {
    if !m.is_finite() {
        return Err(Error::NonFiniteInput);
    }
    let mut w = if m.rows() < m.cols() {
        m.transpose()
    } else {
        m.clone()
    };
    jacobi_orthogonalize(&mut w, None)?;
    let mut top = 0.0f64;
    for j in 0..w.cols() {
        top = top.max(dot(w.col(j), w.col(j)));
    }
    Ok(top.sqrt())
}

/// Operator norm of `V1 V1^T - V2 V2^T` for two orthonormal bases of equal
/// shape. Symmetric in its arguments and in [0, 1] (equal column counts).
pub fn projector_distance(v1: &Matrix, v2: &Matrix) -> Result<f64> {
    if v1.rows() != v2.rows() || v1.cols() != v2.cols() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", v1.rows(), v1.cols()),
            got: format!("{}x{}", v2.rows(), v2.cols()),
        });
    }
    for v in [v1, v2] {
        let defect = v.orthonormality_defect();
        if defect > 1e-8 {
            return Err(Error::NotOrthonormal { deviation: defect });
        }
    }
    let p1 = v1.mul(&v1.transpose());
    let p2 = v2.mul(&v2.transpose());
    operator_norm(&p1.sub(&p2))
}
