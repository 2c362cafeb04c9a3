//! Gaussian mixture instance generation.
//!
//! An instance is `X = P + E` where the columns of `P` are cluster centers
//! placed with a prescribed minimum separation `delta`, the label vector is
//! drawn with a prescribed balance `beta`, and `E` follows the configured
//! noise model. Everything is reproducible byte-for-byte from the seed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{thin_svd, Matrix};
use crate::rng::{mix, CounterRng, StreamRng};

const LABEL_SALT: u64 = 0x6c61_62656c; // "label"
const NOISE_SALT: u64 = 0x6e6f_697365; // "noise"

/// Placement of the cluster centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CenterLayout {
    /// Regular (k-1)-simplex with side exactly `delta`, mean-centered,
    /// embedded in the first k-1 coordinates.
    Simplex,
    /// Centers at 0, delta, 2*delta, ... along the first coordinate axis,
    /// mean-centered. Produces a rank-deficient population matrix for k >= 2,
    /// exercising the no-spectral-gap regime.
    Collinear,
    /// Centers given as a CSV matrix (rows = coordinates, columns = centers).
    Explicit(String),
}

/// Noise model for the error matrix `E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    /// epsilon_i ~ N(0, I_p)
    IsotropicGaussian,
    /// epsilon_i ~ N(0, Sigma)
    GaussianWithCovariance(Matrix),
    /// Centered uniform on [-sigma*sqrt(3), sigma*sqrt(3)]: a bounded,
    /// clearly sub-Gaussian stand-in with variance proxy sigma^2.
    BoundedUniform { variance_proxy: f64 },
}

impl NoiseModel {
    pub fn is_isotropic(&self) -> bool {
        matches!(self, NoiseModel::IsotropicGaussian)
    }
}

/// Parameters of one mixture instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSpec {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub delta: f64,
    pub beta: f64,
    pub layout: CenterLayout,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl GmmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 || self.k == 0 {
            return Err(Error::InvalidSpec("n, p, k must be positive".into()));
        }
        if self.k > self.n {
            return Err(Error::InvalidSpec(format!(
                "k = {} exceeds n = {}",
                self.k, self.n
            )));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::InvalidSpec(format!("delta = {} < 0", self.delta)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "beta = {} not in (0, 1]",
                self.beta
            )));
        }
        if self.beta * self.n as f64 / (self.k as f64) < 1.0 - 1e-9 {
            return Err(Error::InvalidSpec(
                "beta * n / k < 1: smallest cluster would be empty".into(),
            ));
        }
        match &self.layout {
            CenterLayout::Simplex => {
                if self.p + 1 < self.k {
                    return Err(Error::DimensionTooSmall {
                        layout: "simplex",
                        required: self.k - 1,
                        got: self.p,
                    });
                }
            }
            CenterLayout::Collinear => {} // p >= 1 already enforced
            CenterLayout::Explicit(_) => {}
        }
        if let NoiseModel::GaussianWithCovariance(sigma) = &self.noise {
            validate_covariance(sigma, self.p)?;
        }
        if let NoiseModel::BoundedUniform { variance_proxy } = &self.noise {
            if !(*variance_proxy >= 0.0) {
                return Err(Error::InvalidSpec("variance_proxy must be >= 0".into()));
            }
        }
        Ok(())
    }
}

fn validate_covariance(sigma: &Matrix, p: usize) -> Result<()> {
    if sigma.rows() != p || sigma.cols() != p {
        return Err(Error::InvalidSpec(format!(
            "covariance is {}x{}, expected {p}x{p}",
            sigma.rows(),
            sigma.cols()
        )));
    }
    let asym = sigma.sub(&sigma.transpose()).max_abs();
    if asym > 1e-10 {
        return Err(Error::InvalidSpec(format!(
            "covariance asymmetric by {asym:e}"
        )));
    }
    for lambda in symmetric_eigenvalues(sigma)? {
        if lambda < -1e-10 {
            return Err(Error::InvalidSpec(format!(
                "covariance has negative eigenvalue {lambda:e}"
            )));
        }
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix from its SVD: the magnitude is the
/// singular value, the sign is read off u_j . v_j.
fn symmetric_eigenvalues(sigma: &Matrix) -> Result<Vec<f64>> {
    let f = thin_svd(sigma)?;
    Ok((0..f.sigma.len())
        .map(|j| {
            let s = crate::linalg::dot(f.u.col(j), f.v.col(j));
            if s < 0.0 {
                -f.sigma[j]
            } else {
                f.sigma[j]
            }
        })
        .collect())
}

/// Cluster labels, 1-based: every entry lies in 1..=k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelVector(pub Vec<u32>);

impl LabelVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// 1-based label of point `i`.
    #[inline]
    pub fn label(&self, i: usize) -> u32 {
        self.0[i]
    }

    /// 0-based class index of point `i`.
    #[inline]
    pub fn class(&self, i: usize) -> usize {
        (self.0[i] - 1) as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().copied()
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        for (i, &l) in self.0.iter().enumerate() {
            if l == 0 || l as usize > k {
                return Err(Error::LabelOutOfRange {
                    label: l,
                    index: i,
                    k,
                });
            }
        }
        Ok(())
    }

    /// Class sizes, indexed 0-based.
    pub fn class_sizes(&self, k: usize) -> Vec<usize> {
        let mut sizes = vec![0usize; k];
        for i in 0..self.len() {
            sizes[self.class(i)] += 1;
        }
        sizes
    }
}

/// One sampled problem.
#[derive(Debug, Clone)]
pub struct GmmInstance {
    pub spec: GmmSpec,
    /// p x n data matrix, X = P + E.
    pub x: Matrix,
    /// p x n population matrix; column i equals centers[., z_star_i].
    pub p_mat: Matrix,
    /// p x n noise matrix.
    pub e: Matrix,
    pub z_star: LabelVector,
    /// p x k center matrix.
    pub centers: Matrix,
}

/// Minimum pairwise distance among the columns of a center matrix.
pub fn min_center_distance(centers: &Matrix) -> f64 {
    let k = centers.cols();
    let mut best = f64::INFINITY;
    for a in 0..k {
        for b in (a + 1)..k {
            best = best.min(crate::linalg::sqdist(centers.col(a), centers.col(b)).sqrt());
        }
    }
    best
}

/// Ceiling of `beta * n / k` with a guard against floating-point fuzz.
pub fn min_cluster_size(n: usize, k: usize, beta: f64) -> usize {
    (beta * n as f64 / k as f64 - 1e-9).ceil() as usize
}

/// Builds the p x k center matrix for a layout.
pub fn build_centers(layout: &CenterLayout, k: usize, p: usize, delta: f64) -> Result<Matrix> {
    if k == 0 || p == 0 {
        return Err(Error::InvalidSpec("k and p must be positive".into()));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidSpec(format!("delta = {delta} < 0")));
    }
    match layout {
        CenterLayout::Simplex => {
            if p + 1 < k {
                return Err(Error::DimensionTooSmall {
                    layout: "simplex",
                    required: k - 1,
                    got: p,
                });
            }
            Ok(simplex_centers(k, p, delta))
        }
        CenterLayout::Collinear => {
            let mut c = Matrix::zeros(p, k);
            let mean = delta * (k as f64 - 1.0) / 2.0;
            for j in 0..k {
                c[(0, j)] = delta * j as f64 - mean;
            }
            Ok(c)
        }
        CenterLayout::Explicit(csv) => {
            let c = Matrix::from_csv_str(csv)?;
            if c.rows() != p || c.cols() != k {
                return Err(Error::InvalidSpec(format!(
                    "explicit centers are {}x{}, expected {p}x{k}",
                    c.rows(),
                    c.cols()
                )));
            }
            if k >= 2 {
                let dmin = min_center_distance(&c);
                let scale = delta.abs().max(dmin.abs()).max(1e-300);
                if (dmin - delta).abs() > 1e-9 * scale {
                    return Err(Error::InvalidSpec(format!(
                        "explicit centers have minimum distance {dmin}, spec says delta = {delta}"
                    )));
                }
            }
            Ok(c)
        }
    }
}

/// Regular (k-1)-simplex with side `delta`, mean-centered, in the first k-1
/// coordinates. Built vertex by vertex: each new vertex sits above the
/// centroid of the previous ones at the height that keeps all pairwise
/// distances equal to `delta`.
fn simplex_centers(k: usize, p: usize, delta: f64) -> Matrix {
    let dim = k.saturating_sub(1);
    let mut v = vec![vec![0.0f64; dim]; k]; // v[j] = vertex j
    for m in 1..k {
        let mut centroid = vec![0.0f64; dim];
        for vert in v.iter().take(m) {
            for d in 0..dim {
                centroid[d] += vert[d] / m as f64;
            }
        }
        let r2: f64 = (0..dim).map(|d| (centroid[d] - v[0][d]).powi(2)).sum();
        let h = (delta * delta - r2).max(0.0).sqrt();
        v[m][..dim].copy_from_slice(&centroid);
        v[m][m - 1] = centroid[m - 1] + h;
    }
    // mean-center
    for d in 0..dim {
        let mean: f64 = v.iter().map(|vert| vert[d]).sum::<f64>() / k as f64;
        for vert in v.iter_mut() {
            vert[d] -= mean;
        }
    }
    Matrix::from_fn(p, k, |i, j| if i < dim { v[j][i] } else { 0.0 })
}

/// Draws a label vector with minimum class size `ceil(beta n / k)`.
/// Cluster 1 is the designated smallest; the rest split the remainder as
/// evenly as possible; positions are then shuffled.
pub fn assign_labels(n: usize, k: usize, beta: f64, seed: u64) -> Result<LabelVector> {
    if k == 0 || n == 0 {
        return Err(Error::InvalidSpec("n and k must be positive".into()));
    }
    if beta * n as f64 / (k as f64) < 1.0 - 1e-9 {
        return Err(Error::InvalidSpec("beta * n / k < 1".into()));
    }
    if k == 1 {
        return Ok(LabelVector(vec![1; n]));
    }
    let smin = min_cluster_size(n, k, beta);
    if smin * k > n {
        return Err(Error::InfeasibleBalance {
            min_size: smin,
            k,
            n,
        });
    }
    let rest = n - smin;
    let base = rest / (k - 1);
    let extra = rest % (k - 1);
    let mut labels: Vec<u32> = Vec::with_capacity(n);
    labels.extend(std::iter::repeat(1u32).take(smin));
    for j in 0..(k - 1) {
        let size = base + usize::from(j < extra);
        labels.extend(std::iter::repeat(j as u32 + 2).take(size));
    }
    debug_assert_eq!(labels.len(), n);
    let mut rng = StreamRng::new(seed);
    rng.shuffle(&mut labels);
    Ok(LabelVector(labels))
}

/// Samples one instance. Byte-for-byte reproducible from `spec.seed`.
pub fn sample_instance(spec: &GmmSpec) -> Result<GmmInstance> {
    spec.validate()?;
    let centers = build_centers(&spec.layout, spec.k, spec.p, spec.delta)?;
    let z_star = assign_labels(spec.n, spec.k, spec.beta, mix(&[spec.seed, LABEL_SALT]))?;
    let mut p_mat = Matrix::zeros(spec.p, spec.n);
    for i in 0..spec.n {
        p_mat.set_col(i, centers.col(z_star.class(i)));
    }
    let e = sample_noise(spec)?;
    let x = p_mat.add(&e);
    Ok(GmmInstance {
        spec: spec.clone(),
        x,
        p_mat,
        e,
        z_star,
        centers,
    })
}

fn sample_noise(spec: &GmmSpec) -> Result<Matrix> {
    let rng = CounterRng::new(mix(&[spec.seed, NOISE_SALT]));
    let (p, n) = (spec.p, spec.n);
    match &spec.noise {
        NoiseModel::IsotropicGaussian => Ok(Matrix::from_fn(p, n, |i, j| {
            rng.normal_at((j * p + i) as u64)
        })),
        NoiseModel::GaussianWithCovariance(sigma) => {
            let root = symmetric_sqrt(sigma)?;
            let g = Matrix::from_fn(p, n, |i, j| rng.normal_at((j * p + i) as u64));
            Ok(root.mul(&g))
        }
        NoiseModel::BoundedUniform { variance_proxy } => {
            let half_width = variance_proxy.sqrt() * 3.0f64.sqrt();
            Ok(Matrix::from_fn(p, n, |i, j| {
                half_width * (2.0 * rng.uniform_at((j * p + i) as u64) - 1.0)
            }))
        }
    }
}

/// Symmetric PSD square root via the SVD, with eigenvalues in
/// [-1e-10, 0) clamped to zero.
fn symmetric_sqrt(sigma: &Matrix) -> Result<Matrix> {
    let f = thin_svd(sigma)?;
    let p = sigma.rows();
    let mut scaled = f.u.clone();
    for j in 0..f.sigma.len() {
        let lam = {
            let s = crate::linalg::dot(f.u.col(j), f.v.col(j));
            if s < 0.0 {
                -f.sigma[j]
            } else {
                f.sigma[j]
            }
        };
        let root = lam.max(0.0).sqrt();
        for i in 0..p {
            scaled[(i, j)] *= root;
        }
    }
    Ok(scaled.mul(&f.u.transpose()))
}

impl GmmInstance {
    /// Checks every construction invariant; used by tests and the CLI.
    pub fn validate(&self) -> Result<()> {
        let (p, n, k) = (self.spec.p, self.spec.n, self.spec.k);
        for (m, name) in [(&self.x, "X"), (&self.p_mat, "P"), (&self.e, "E")] {
            if m.rows() != p || m.cols() != n {
                return Err(Error::InvalidSpec(format!("{name} has wrong shape")));
            }
        }
        // X = P + E entrywise, exact by construction
        for idx in 0..p * n {
            if self.x.data()[idx] != self.p_mat.data()[idx] + self.e.data()[idx] {
                return Err(Error::InvalidSpec("X != P + E".into()));
            }
        }
        if k >= 2 {
            let dmin = min_center_distance(&self.centers);
            let scale = self.spec.delta.abs().max(dmin.abs()).max(1e-300);
            if (dmin - self.spec.delta).abs() > 1e-9 * scale {
                return Err(Error::InvalidSpec(format!(
                    "minimum center distance {dmin} != delta {}",
                    self.spec.delta
                )));
            }
        }
        self.z_star.validate(k)?;
        let sizes = self.z_star.class_sizes(k);
        let smin = min_cluster_size(n, k, self.spec.beta);
        if sizes.iter().any(|&s| s < smin) {
            return Err(Error::InvalidSpec(format!(
                "class sizes {sizes:?} violate minimum {smin}"
            )));
        }
        Ok(())
    }

    /// Balance actually achieved by the labels: min class size / (n/k).
    pub fn realized_beta(&self) -> f64 {
        let sizes = self.z_star.class_sizes(self.spec.k);
        let min = *sizes.iter().min().unwrap() as f64;
        min * self.spec.k as f64 / self.spec.n as f64
    }

    /// Assembles an instance from explicit parts, deriving the spec fields
    /// from the data. Useful for tests and for clustering external data.
    pub fn assemble(centers: Matrix, z_star: LabelVector, e: Matrix, seed: u64) -> Result<Self> {
        let p = centers.rows();
        let k = centers.cols();
        let n = z_star.len();
        if e.rows() != p || e.cols() != n {
            return Err(Error::ShapeMismatch {
                expected: format!("{p}x{n}"),
                got: format!("{}x{}", e.rows(), e.cols()),
            });
        }
        z_star.validate(k)?;
        let sizes = z_star.class_sizes(k);
        if let Some(class) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::EmptyInputClass { class: class + 1 });
        }
        let delta = if k >= 2 {
            min_center_distance(&centers)
        } else {
            0.0
        };
        let beta = *sizes.iter().min().unwrap() as f64 * k as f64 / n as f64;
        let mut p_mat = Matrix::zeros(p, n);
        for i in 0..n {
            p_mat.set_col(i, centers.col(z_star.class(i)));
        }
        let x = p_mat.add(&e);
        let spec = GmmSpec {
            n,
            p,
            k,
            delta,
            beta,
            layout: CenterLayout::Explicit(centers.to_csv_string()),
            noise: NoiseModel::IsotropicGaussian,
            seed,
        };
        Ok(GmmInstance {
            spec,
            x,
            p_mat,
            e,
            z_star,
            centers,
        })
    }
}
