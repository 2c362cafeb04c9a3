//! Dense column-major matrix of `f64`.
//!
//! Column-major because the clustering algorithms consume columns (data
//! points); a column is a contiguous slice.

use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>, // data[i + j * rows]
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds from column-major data.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{} entries", rows * cols),
                got: format!("{}", data.len()),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn set_col(&mut self, j: usize, v: &[f64]) {
        debug_assert_eq!(v.len(), self.rows);
        self.col_mut(j).copy_from_slice(v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `self * other`
    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let bj = other.col(j);
            let oj = out.col_mut(j);
            for (l, &b) in bj.iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                let al = self.col(l);
                for i in 0..al.len() {
                    oj[i] += al[i] * b;
                }
            }
        }
        out
    }

    /// `self^T * other`
    pub fn tr_mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.cols, other.cols);
        for j in 0..other.cols {
            let bj = other.col(j);
            for i in 0..self.cols {
                out[(i, j)] = dot(self.col(i), bj);
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * c).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Keeps the first `m` columns.
    pub fn take_cols(&self, m: usize) -> Matrix {
        assert!(m <= self.cols);
        Matrix {
            rows: self.rows,
            cols: m,
            data: self.data[..self.rows * m].to_vec(),
        }
    }

    /// Columns `from..to` (half-open).
    pub fn col_range(&self, from: usize, to: usize) -> Matrix {
        assert!(from <= to && to <= self.cols);
        Matrix {
            rows: self.rows,
            cols: to - from,
            data: self.data[self.rows * from..self.rows * to].to_vec(),
        }
    }

    /// Applies a Givens rotation to columns `p < q` in place.
    pub(crate) fn rotate_cols(&mut self, p: usize, q: usize, cos: f64, sin: f64) {
        debug_assert!(p < q && q < self.cols);
        let rows = self.rows;
        let (head, tail) = self.data.split_at_mut(q * rows);
        let colp = &mut head[p * rows..(p + 1) * rows];
        let colq = &mut tail[..rows];
        for i in 0..rows {
            let x = colp[i];
            let y = colq[i];
            colp[i] = cos * x - sin * y;
            colq[i] = sin * x + cos * y;
        }
    }

    /// Same rotation, also returning the squared norms of the two rotated
    /// columns, computed in the same pass.
    pub(crate) fn rotate_cols_tracked(
        &mut self,
        p: usize,
        q: usize,
        cos: f64,
        sin: f64,
    ) -> (f64, f64) {
        debug_assert!(p < q && q < self.cols);
        let rows = self.rows;
        let (head, tail) = self.data.split_at_mut(q * rows);
        let colp = &mut head[p * rows..(p + 1) * rows];
        let colq = &mut tail[..rows];
        let mut np = 0.0f64;
        let mut nq = 0.0f64;
        for i in 0..rows {
            let x = colp[i];
            let y = colq[i];
            let xp = cos * x - sin * y;
            let yq = sin * x + cos * y;
            colp[i] = xp;
            colq[i] = yq;
            np += xp * xp;
            nq += yq * yq;
        }
        (np, nq)
    }

    /// Max-norm deviation of `self^T self` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.tr_mul(self);
        let mut worst = 0.0f64;
        for j in 0..g.cols {
            for i in 0..g.rows {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Parses a CSV string: one row per line, comma-separated entries.
    pub fn from_csv_str(text: &str) -> Result<Matrix> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| {
                Error::InvalidSpec(format!("csv parse error on line {}: {e}", ln + 1))
            })?;
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(Error::InvalidSpec(format!(
                        "csv row {} has {} entries, expected {}",
                        ln + 1,
                        row.len(),
                        first.len()
                    )));
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::InvalidSpec("empty csv matrix".into()));
        }
        let (r, c) = (rows.len(), rows[0].len());
        Ok(Matrix::from_fn(r, c, |i, j| rows[i][j]))
    }

    /// Formats as CSV with 17 significant digits and LF line endings.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            for j in 0..self.cols {
                if j > 0 {
                    out.push(',');
                }
                out.push_str(&format_g17(self[(i, j)]));
            }
            out.push('\n');
        }
        out
    }
}

/// 17 significant digits, enough to round-trip any f64.
pub fn format_g17(x: f64) -> String {
    format!("{:.16e}", x)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Squared Euclidean distance between two slices.
#[inline]
pub fn sqdist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        s += d * d;
    }
    s
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.rows]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.rows]
    }
}

// Serialized as an array of rows so hand-written JSON stays readable.
impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)]).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(deserializer)?;
        if rows.is_empty() {
            return Err(D::Error::custom("matrix must have at least one row"));
        }
        let c = rows[0].len();
        if c == 0 || rows.iter().any(|r| r.len() != c) {
            return Err(D::Error::custom("matrix rows must be nonempty and equal length"));
        }
        Ok(Matrix::from_fn(rows.len(), c, |i, j| rows[i][j]))
    }
}
