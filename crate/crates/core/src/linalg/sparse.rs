use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Relations whose density falls below this fraction are kept in coordinate form.
pub const SPARSE_DENSITY_THRESHOLD: f64 = 0.05;

/// Coordinate-format sparse matrix with entries sorted by (row, col) and no
/// duplicate coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<T> {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Scalar> SparseMatrix<T> {
    /// Builds from triplets. Duplicate coordinates and out-of-range indices are rejected.
    pub fn from_triplets(rows: usize, cols: usize, mut entries: Vec<(usize, usize, T)>) -> Result<Self> {
        if let Some(&(r, c, _)) = entries.iter().find(|(r, c, _)| *r >= rows || *c >= cols) {
            return Err(Error::Format(format!(
                "triplet ({r}, {c}) outside {rows}x{cols} matrix"
            )));
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::Format(format!(
                "duplicate entry at ({}, {})",
                w[0].0, w[0].1
            )));
        }
        Ok(SparseMatrix { rows, cols, entries })
    }

    /// Keeps the nonzero entries of a dense matrix.
    pub fn from_dense(m: &Matrix<T>) -> Self {
        let mut entries = Vec::new();
        for r in 0..m.rows() {
            for (c, &v) in m.row(r).iter().enumerate() {
                if v != T::zero() {
                    entries.push((r, c, v));
                }
            }
        }
        SparseMatrix {
            rows: m.rows(),
            cols: m.cols(),
            entries,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn entries(&self) -> &[(usize, usize, T)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn density(&self) -> f64 {
        let cells = self.rows * self.cols;
        if cells == 0 {
            0.0
        } else {
            self.nnz() as f64 / cells as f64
        }
    }

    pub fn to_dense(&self) -> Matrix<T> {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for &(r, c, v) in &self.entries {
            m[(r, c)] = v;
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut entries: Vec<_> = self.entries.iter().map(|&(r, c, v)| (c, r, v)).collect();
        entries.sort_by_key(|&(r, c, _)| (r, c));
        SparseMatrix {
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }

    /// Sparse × dense product. Entries are visited in row-major order so the
    /// accumulation order per output cell matches the dense kernel.
    pub fn matmul_dense(&self, rhs: &Matrix<T>) -> Result<Matrix<T>> {
        if self.cols != rhs.rows() {
            return Err(Error::DimensionMismatch {
                op: "sparse_matmul",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols());
        for &(r, c, v) in &self.entries {
            let src = rhs.row(c);
            for (o, &b) in out.row_mut(r).iter_mut().zip(src) {
                *o += v * b;
            }
        }
        Ok(out)
    }
}

/// Storage of a relation or view block: dense by default, coordinate-sparse
/// when loaded from a sparse file below the density threshold.
#[derive(Clone, Debug, PartialEq)]
pub enum Block<T> {
    Dense(Matrix<T>),
    Sparse(SparseMatrix<T>),
}

impl<T: Scalar> Block<T> {
    /// Picks sparse storage when the nonzero fraction is below
    /// [`SPARSE_DENSITY_THRESHOLD`].
    pub fn auto(sparse: SparseMatrix<T>) -> Self {
        if sparse.density() < SPARSE_DENSITY_THRESHOLD {
            Block::Sparse(sparse)
        } else {
            Block::Dense(sparse.to_dense())
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Block::Dense(m) => m.shape(),
            Block::Sparse(s) => s.shape(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, Block::Sparse(_))
    }

    pub fn dense(&self) -> Cow<'_, Matrix<T>> {
        match self {
            Block::Dense(m) => Cow::Borrowed(m),
            Block::Sparse(s) => Cow::Owned(s.to_dense()),
        }
    }

    pub fn matmul_dense(&self, rhs: &Matrix<T>) -> Result<Matrix<T>> {
        match self {
            Block::Dense(m) => m.matmul(rhs),
            Block::Sparse(s) => s.matmul_dense(rhs),
        }
    }

    /// Calls `f(row, col, value)` for every stored nonzero.
    pub fn for_each_nonzero(&self, mut f: impl FnMut(usize, usize, T)) {
        match self {
            Block::Dense(m) => {
                for r in 0..m.rows() {
                    for (c, &v) in m.row(r).iter().enumerate() {
                        if v != T::zero() {
                            f(r, c, v);
                        }
                    }
                }
            }
            Block::Sparse(s) => {
                for &(r, c, v) in s.entries() {
                    f(r, c, v);
                }
            }
        }
    }

    /// Calls `f(row, col, value)` for every cell, zeros included.
    pub fn for_each_cell(&self, mut f: impl FnMut(usize, usize, T)) {
        let m = self.dense();
        for r in 0..m.rows() {
            for (c, &v) in m.row(r).iter().enumerate() {
                f(r, c, v);
            }
        }
    }
}

impl<T: Scalar> From<Matrix<T>> for Block<T> {
    fn from(m: Matrix<T>) -> Self {
        Block::Dense(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_sparse_roundtrip_is_exact() {
        let m = Matrix::from_rows(&[[0.0, 1.25, 0.0], [3.0, 0.0, -7.5]]);
        let s = SparseMatrix::from_dense(&m);
        assert_eq!(s.nnz(), 3);
        assert_eq!(s.to_dense(), m);
    }

    #[test]
    fn duplicate_triplets_rejected() {
        let err = SparseMatrix::<f64>::from_triplets(2, 2, vec![(0, 1, 1.0), (0, 1, 2.0)]).unwrap_err();
        assert!(err.to_string().contains("duplicate entry"));
    }

    #[test]
    fn out_of_range_triplet_rejected() {
        assert!(SparseMatrix::<f64>::from_triplets(2, 2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn sparse_product_matches_dense() {
        let a = Matrix::from_rows(&[[0.0, 2.0, 0.0], [1.0, 0.0, 3.0]]);
        let b = Matrix::from_rows(&[[1.0, -1.0], [0.5, 2.0], [4.0, 0.0]]);
        let s = SparseMatrix::from_dense(&a);
        assert_eq!(s.matmul_dense(&b).unwrap(), a.matmul(&b).unwrap());
        assert_eq!(s.transpose().to_dense(), a.transpose());
    }

    #[test]
    fn auto_storage_respects_threshold() {
        let mut triplets = vec![(0, 0, 1.0)];
        let sparse = SparseMatrix::<f64>::from_triplets(10, 10, triplets.clone()).unwrap();
        assert!(Block::auto(sparse).is_sparse());
        triplets.extend((1..10).map(|i| (i, i, 1.0)));
        let dense = SparseMatrix::<f64>::from_triplets(10, 10, triplets).unwrap();
        assert!(!Block::auto(dense).is_sparse());
    }
}
