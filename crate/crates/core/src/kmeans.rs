//! k-means solvers: D^2 seeding, Lloyd iterations, the one-step refinement
//! used after an approximate solve, and an exhaustive oracle for tiny
//! instances.
//!
//! Conventions fixed for reproducibility: assignment ties break toward the
//! lowest center index, an empty cluster is reseeded to the point farthest
//! from its assigned center, and all distances are squared Euclidean
//! compared with exact floating-point ordering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::LabelVector;
use crate::linalg::{sqdist, Matrix};
use crate::rng::{mix, StreamRng};

pub const ORACLE_MAX_N: usize = 14;
pub const ORACLE_MAX_K: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Relative objective-change threshold for convergence.
    pub tol: f64,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            restarts: 20,
            max_iters: 100,
            tol: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansSolution {
    pub labels: LabelVector,
    /// d x k center matrix.
    pub centers: Matrix,
    /// Sum over points of squared distance to the assigned center.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl KMeansSolution {
    /// Recomputes the objective from labels and centers.
    pub fn recompute_objective(&self, y: &Matrix) -> f64 {
        objective_of(y, &self.labels, &self.centers)
    }
}

pub fn objective_of(y: &Matrix, labels: &LabelVector, centers: &Matrix) -> f64 {
    let mut obj = 0.0;
    for i in 0..y.cols() {
        obj += sqdist(y.col(i), centers.col(labels.class(i)));
    }
    obj
}

/// Class means of the labeled columns. Errors if a class in 1..=k is empty.
pub fn class_means(y: &Matrix, labels: &LabelVector, k: usize) -> Result<Matrix> {
    let mut centers = Matrix::zeros(y.rows(), k);
    let mut counts = vec![0usize; k];
    for i in 0..y.cols() {
        let c = labels.class(i);
        counts[c] += 1;
        let yi = y.col(i);
        let col = centers.col_mut(c);
        for d in 0..yi.len() {
            col[d] += yi[d];
        }
    }
    for (c, &cnt) in counts.iter().enumerate() {
        if cnt == 0 {
            return Err(Error::EmptyInputClass { class: c + 1 });
        }
        let inv = 1.0 / cnt as f64;
        for x in centers.col_mut(c) {
            *x *= inv;
        }
    }
    Ok(centers)
}

/// kmeans++ seeding: k distinct columns of `y`, the first uniform, each
/// subsequent one drawn proportionally to the squared distance from the
/// chosen set. If every remaining distance is zero the next center is drawn
/// uniformly among unchosen columns.
pub fn kmeanspp_seed(y: &Matrix, k: usize, seed: u64) -> Result<Matrix> {
    let n = y.cols();
    if k > n {
        return Err(Error::KExceedsN { k, n });
    }
    let mut rng = StreamRng::new(seed);
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut is_chosen = vec![false; n];
    let mut d2 = vec![f64::INFINITY; n];
    for round in 0..k {
        let pick = if round == 0 {
            rng.below(n)
        } else {
            let total: f64 = d2.iter().sum();
            if total > 0.0 {
                let u = rng.next_f64() * total;
                let mut cum = 0.0;
                let mut pick = n - 1;
                for (i, &w) in d2.iter().enumerate() {
                    cum += w;
                    if u < cum {
                        pick = i;
                        break;
                    }
                }
                // cumulative rounding can leave pick on a chosen column;
                // fall through to the uniform branch in that case
                if !is_chosen[pick] {
                    pick
                } else {
                    nth_unchosen(&is_chosen, rng.below(n - round))
                }
            } else {
                nth_unchosen(&is_chosen, rng.below(n - round))
            }
        };
        chosen.push(pick);
        is_chosen[pick] = true;
        let picked_col = y.col(pick).to_vec();
        for i in 0..n {
            let d = sqdist(y.col(i), &picked_col);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    let mut centers = Matrix::zeros(y.rows(), k);
    for (j, &i) in chosen.iter().enumerate() {
        centers.set_col(j, y.col(i));
    }
    Ok(centers)
}

fn nth_unchosen(is_chosen: &[bool], nth: usize) -> usize {
    let mut seen = 0usize;
    for (i, &c) in is_chosen.iter().enumerate() {
        if !c {
            if seen == nth {
                return i;
            }
            seen += 1;
        }
    }
    unreachable!("ran out of unchosen columns");
}

/// Lloyd iterations from the given initial centers.
pub fn lloyd(y: &Matrix, init_centers: &Matrix, config: &KMeansConfig) -> KMeansSolution {
    lloyd_traced(y, init_centers, config).0
}

/// Lloyd iterations, also returning the per-iteration objective trace
/// (recorded after each center update; nonincreasing).
pub fn lloyd_traced(
    y: &Matrix,
    init_centers: &Matrix,
    config: &KMeansConfig,
) -> (KMeansSolution, Vec<f64>) {
    let n = y.cols();
    let k = init_centers.cols();
    assert_eq!(y.rows(), init_centers.rows(), "dimension mismatch");
    let mut centers = init_centers.clone();
    let mut labels = vec![1u32; n];
    let mut trace: Vec<f64> = Vec::new();
    let mut prev_obj = f64::INFINITY;
    let mut iterations = 0usize;
    let mut converged = false;

    for _ in 0..config.max_iters {
        iterations += 1;
        // assignment, ties to the lowest center index
        let mut sizes = vec![0usize; k];
        let mut dists = vec![0.0f64; n];
        for i in 0..n {
            let yi = y.col(i);
            let mut best = 0usize;
            let mut best_d = sqdist(yi, centers.col(0));
            for j in 1..k {
                let d = sqdist(yi, centers.col(j));
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            labels[i] = best as u32 + 1;
            dists[i] = best_d;
            sizes[best] += 1;
        }
        // reseed empty clusters with the farthest point of a non-singleton
        // cluster; its center becomes that point
        for e in 0..k {
            if sizes[e] > 0 {
                continue;
            }
            let mut far_i = usize::MAX;
            let mut far_d = -1.0;
            for i in 0..n {
                let c = (labels[i] - 1) as usize;
                if sizes[c] >= 2 && dists[i] > far_d {
                    far_d = dists[i];
                    far_i = i;
                }
            }
            if far_i == usize::MAX {
                continue; // fewer distinct points than clusters
            }
            let old = (labels[far_i] - 1) as usize;
            sizes[old] -= 1;
            sizes[e] += 1;
            labels[far_i] = e as u32 + 1;
            dists[far_i] = 0.0;
            let point = y.col(far_i).to_vec();
            centers.set_col(e, &point);
        }
        // center update: mean of each nonempty class
        let mut sums = Matrix::zeros(y.rows(), k);
        for i in 0..n {
            let c = (labels[i] - 1) as usize;
            let yi = y.col(i);
            let col = sums.col_mut(c);
            for d in 0..yi.len() {
                col[d] += yi[d];
            }
        }
        for j in 0..k {
            if sizes[j] > 0 {
                let inv = 1.0 / sizes[j] as f64;
                let col = sums.col_mut(j);
                for x in col.iter_mut() {
                    *x *= inv;
                }
                let updated = sums.col(j).to_vec();
                centers.set_col(j, &updated);
            }
            // empty cluster (degenerate input): keep its previous center
        }
        let label_vec = LabelVector(labels.clone());
        let obj = objective_of(y, &label_vec, &centers);
        trace.push(obj);
        if obj == prev_obj || (prev_obj - obj).abs() < config.tol * prev_obj.max(f64::MIN_POSITIVE)
        {
            converged = true;
            break;
        }
        if obj == 0.0 {
            converged = true;
            break;
        }
        prev_obj = obj;
    }

    let labels = LabelVector(labels);
    let objective = objective_of(y, &labels, &centers);
    (
        KMeansSolution {
            labels,
            centers,
            objective,
            iterations,
            converged,
        },
        trace,
    )
}

/// Best of `config.restarts` independent kmeans++ + Lloyd runs; restart `r`
/// derives its randomness from `(config.seed, r)` so results do not depend
/// on scheduling.
pub fn solve(y: &Matrix, k: usize, config: &KMeansConfig) -> Result<KMeansSolution> {
    let n = y.cols();
    if k > n {
        return Err(Error::KExceedsN { k, n });
    }
    if k == 0 || config.restarts == 0 || config.max_iters == 0 {
        return Err(Error::InvalidSpec(
            "k, restarts and max_iters must be positive".into(),
        ));
    }
    let mut best: Option<KMeansSolution> = None;
    for r in 0..config.restarts {
        let init = kmeanspp_seed(y, k, mix(&[config.seed, r as u64]))?;
        let sol = lloyd(y, &init, config);
        let better = match &best {
            None => true,
            Some(b) => sol.objective < b.objective,
        };
        if better {
            best = Some(sol);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// Globally optimal k-means over all surjective assignments, by
/// branch-and-bound enumeration. Only for tiny instances.
pub fn exact_oracle(y: &Matrix, k: usize) -> Result<KMeansSolution> {
    let n = y.cols();
    if n > ORACLE_MAX_N || k > ORACLE_MAX_K {
        return Err(Error::InstanceTooLarge {
            n,
            k,
            max_n: ORACLE_MAX_N,
            max_k: ORACLE_MAX_K,
        });
    }
    if k > n {
        return Err(Error::KExceedsN { k, n });
    }
    if k == 0 {
        return Err(Error::InvalidSpec("k must be positive".into()));
    }
    let d = y.rows();
    let mut state = OracleState {
        y,
        n,
        k,
        d,
        counts: vec![0usize; k],
        sums: vec![vec![0.0; d]; k],
        sumsq: vec![0.0; k],
        assignment: vec![0usize; n],
        best_obj: f64::INFINITY,
        best_assignment: vec![0usize; n],
    };
    search(&mut state, 0, 0, 0.0);
    let labels = LabelVector(state.best_assignment.iter().map(|&c| c as u32 + 1).collect());
    let centers = class_means(y, &labels, k)?;
    let objective = objective_of(y, &labels, &centers);
    Ok(KMeansSolution {
        labels,
        centers,
        objective,
        iterations: 0,
        converged: true,
    })
}

struct OracleState<'a> {
    y: &'a Matrix,
    n: usize,
    k: usize,
    d: usize,
    counts: Vec<usize>,
    sums: Vec<Vec<f64>>,
    sumsq: Vec<f64>,
    assignment: Vec<usize>,
    best_obj: f64,
    best_assignment: Vec<usize>,
}

/// Enumerates assignments in canonical order (cluster labels appear in
/// first-occurrence order), pruning on the running within-cluster cost.
fn search(st: &mut OracleState, i: usize, used: usize, cost: f64) {
    if cost >= st.best_obj {
        return;
    }
    if i == st.n {
        if used == st.k {
            st.best_obj = cost;
            st.best_assignment.copy_from_slice(&st.assignment);
        }
        return;
    }
    // surjectivity: remaining points must cover remaining new clusters
    if st.k - used > st.n - i {
        return;
    }
    let yi: Vec<f64> = st.y.col(i).to_vec();
    let yi_sq: f64 = yi.iter().map(|x| x * x).sum();
    let limit = (used + 1).min(st.k);
    for c in 0..limit {
        // cost increase of adding point i to cluster c:
        // sum of squared distances to the mean is sumsq - |sum|^2 / count
        let old_cost = cluster_cost(st, c);
        st.counts[c] += 1;
        for d in 0..st.d {
            st.sums[c][d] += yi[d];
        }
        st.sumsq[c] += yi_sq;
        let new_cost = cluster_cost(st, c);
        st.assignment[i] = c;
        search(
            st,
            i + 1,
            used.max(c + 1),
            cost + (new_cost - old_cost),
        );
        st.counts[c] -= 1;
        for d in 0..st.d {
            st.sums[c][d] -= yi[d];
        }
        st.sumsq[c] -= yi_sq;
    }
}

fn cluster_cost(st: &OracleState, c: usize) -> f64 {
    if st.counts[c] == 0 {
        return 0.0;
    }
    let norm2: f64 = st.sums[c].iter().map(|x| x * x).sum();
    (st.sumsq[c] - norm2 / st.counts[c] as f64).max(0.0)
}

/// One step of Lloyd's algorithm: centers become the class means of the
/// input labels, then every column is reassigned to its nearest updated
/// center (ties to the lowest index). The output satisfies the local
/// optimality predicate by construction.
pub fn refine_once(y: &Matrix, labels: &LabelVector) -> Result<KMeansSolution> {
    let n = y.cols();
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: n,
        });
    }
    let k = labels.iter().max().unwrap_or(0) as usize;
    if k == 0 {
        return Err(Error::InvalidSpec("empty label vector".into()));
    }
    labels.validate(k)?;
    let centers = class_means(y, labels, k)?;
    let mut new_labels = vec![1u32; n];
    for i in 0..n {
        let yi = y.col(i);
        let mut best = 0usize;
        let mut best_d = sqdist(yi, centers.col(0));
        for j in 1..k {
            let d = sqdist(yi, centers.col(j));
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        new_labels[i] = best as u32 + 1;
    }
    let converged = new_labels
        .iter()
        .zip(labels.iter())
        .all(|(&a, b)| a == b);
    let new_labels = LabelVector(new_labels);
    let objective = objective_of(y, &new_labels, &centers);
    Ok(KMeansSolution {
        labels: new_labels,
        centers,
        objective,
        iterations: 1,
        converged,
    })
}

/// True when every point is at least as close to its own center as to any
/// other, under exact floating-point comparison of squared distances.
pub fn local_optimality_holds(y: &Matrix, labels: &LabelVector, centers: &Matrix) -> bool {
    for i in 0..y.cols() {
        let yi = y.col(i);
        let own = sqdist(yi, centers.col(labels.class(i)));
        for j in 0..centers.cols() {
            if sqdist(yi, centers.col(j)) < own {
                return false;
            }
        }
    }
    true
}
