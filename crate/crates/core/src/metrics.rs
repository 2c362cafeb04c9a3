//! Permutation-minimized misclustering loss and center-matching error.
//!
//! The loss minimizes the mismatch count over all bijections of the label
//! symbols. Up to k = 8 this enumerates all k! permutations; beyond that it
//! solves an exact assignment problem on the k x k agreement matrix, which
//! attains the same minimum.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gmm::LabelVector;
use crate::linalg::Matrix;

const ENUMERATION_LIMIT: usize = 8;

#[derive(Debug, Clone, Serialize)]
pub struct MatchResult {
    /// Fraction of points misclustered under the best permutation, in [0, 1].
    pub loss: f64,
    /// Image of the bijection, 1-based: label `a` maps to `permutation[a-1]`.
    pub permutation: Vec<u32>,
    pub mismatches: usize,
    /// Max center deviation under the permutation, when centers were matched.
    pub center_error: Option<f64>,
}

/// Loss between an estimated labeling `z` and a reference `z_star`.
/// The permutation is applied to `z`'s symbols: it minimizes
/// `#{i : phi(z_i) != z_star_i}`.
pub fn misclustering_loss(z: &LabelVector, z_star: &LabelVector, k: usize) -> Result<MatchResult> {
    if z.len() != z_star.len() {
        return Err(Error::LengthMismatch {
            left: z.len(),
            right: z_star.len(),
        });
    }
    z.validate(k)?;
    z_star.validate(k)?;
    let n = z.len();
    // agreement[a][b] = #{i : z_i = a+1 and z_star_i = b+1}
    let mut agreement = vec![vec![0usize; k]; k];
    for i in 0..n {
        agreement[z.class(i)][z_star.class(i)] += 1;
    }
    let assignment = if k <= ENUMERATION_LIMIT {
        best_permutation_enumerated(&agreement)
    } else {
        best_permutation_assignment(&agreement)
    };
    let agree: usize = (0..k).map(|a| agreement[a][assignment[a]]).sum();
    let mismatches = n - agree;
    Ok(MatchResult {
        loss: mismatches as f64 / n as f64,
        permutation: assignment.iter().map(|&b| b as u32 + 1).collect(),
        mismatches,
        center_error: None,
    })
}

/// Exhaustive search over permutations, maximizing total agreement.
/// Exposed to the crate for the equivalence test against the assignment
/// solver.
pub(crate) fn best_permutation_enumerated(agreement: &[Vec<usize>]) -> Vec<usize> {
    let k = agreement.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best_perm = perm.clone();
    let mut best_score: usize = (0..k).map(|a| agreement[a][a]).sum();
    permute(&mut perm, 0, &mut |p| {
        let score: usize = (0..k).map(|a| agreement[a][p[a]]).sum();
        if score > best_score {
            best_score = score;
            best_perm = p.to_vec();
        }
    });
    best_perm
}

fn permute(xs: &mut [usize], at: usize, visit: &mut impl FnMut(&[usize])) {
    if at == xs.len() {
        visit(xs);
        return;
    }
    for i in at..xs.len() {
        xs.swap(at, i);
        permute(xs, at + 1, visit);
        xs.swap(at, i);
    }
}

/// Exact assignment on the agreement matrix via the Hungarian algorithm
/// (potentials formulation, O(k^3)), maximizing agreement by minimizing
/// `max_entry - agreement`.
pub(crate) fn best_permutation_assignment(agreement: &[Vec<usize>]) -> Vec<usize> {
    let k = agreement.len();
    let top = agreement
        .iter()
        .flat_map(|r| r.iter())
        .copied()
        .max()
        .unwrap_or(0) as f64;
    let cost = |a: usize, b: usize| top - agreement[a][b] as f64;

    // 1-indexed arrays per the classical formulation
    let inf = f64::INFINITY;
    let mut u = vec![0.0f64; k + 1];
    let mut v = vec![0.0f64; k + 1];
    let mut matched_col_to_row = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        matched_col_to_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = matched_col_to_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=k {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[matched_col_to_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_col_to_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_col_to_row[j0] = matched_col_to_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; k];
    for j in 1..=k {
        perm[matched_col_to_row[j] - 1] = j - 1;
    }
    perm
}

/// Max over clusters of the distance between a matched center pair:
/// `max_j ||theta_hat_j - theta_star_{phi(j)}||`.
pub fn center_error(theta_hat: &Matrix, theta_star: &Matrix, permutation: &[u32]) -> Result<f64> {
    if theta_hat.rows() != theta_star.rows() || theta_hat.cols() != theta_star.cols() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", theta_hat.rows(), theta_hat.cols()),
            got: format!("{}x{}", theta_star.rows(), theta_star.cols()),
        });
    }
    let k = theta_hat.cols();
    if permutation.len() != k {
        return Err(Error::LengthMismatch {
            left: permutation.len(),
            right: k,
        });
    }
    let mut seen = vec![false; k];
    for &b in permutation {
        if b == 0 || b as usize > k || seen[(b - 1) as usize] {
            return Err(Error::InvalidSpec(format!(
                "permutation {permutation:?} is not a bijection of 1..={k}"
            )));
        }
        seen[(b - 1) as usize] = true;
    }
    let mut worst = 0.0f64;
    for j in 0..k {
        let target = (permutation[j] - 1) as usize;
        worst = worst.max(crate::linalg::sqdist(theta_hat.col(j), theta_star.col(target)).sqrt());
    }
    Ok(worst)
}

/// Convenience: loss plus center error at the loss-optimal permutation.
pub fn match_with_centers(
    z: &LabelVector,
    z_star: &LabelVector,
    k: usize,
    theta_hat: &Matrix,
    theta_star: &Matrix,
) -> Result<MatchResult> {
    let mut m = misclustering_loss(z, z_star, k)?;
    m.center_error = Some(center_error(theta_hat, theta_star, &m.permutation)?);
    Ok(m)
}
