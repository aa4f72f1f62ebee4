use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Learned state of the tri-factorization.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorModel<T> {
    /// Nonnegative `G_i`, one per object type, shape `n_i × k_i`.
    pub factors: Vec<Matrix<T>>,
    /// Cores `S_ij` keyed by `(i, j)`: one per declared relation, plus the
    /// `(instance, label)` core whenever the dispatch term is active.
    pub cores: BTreeMap<(usize, usize), Matrix<T>>,
    /// `W^r`, `m × m`; zero for undeclared relations.
    pub relation_weights: Matrix<T>,
    /// `W^h`, `m × τ`; zero for absent views.
    pub view_weights: Matrix<T>,
    /// Objective after every completed sweep.
    pub history: Vec<T>,
}

impl<T: Scalar> FactorModel<T> {
    pub fn num_types(&self) -> usize {
        self.factors.len()
    }

    pub fn factor(&self, i: usize) -> Result<&Matrix<T>> {
        self.factors.get(i).ok_or(Error::UnknownType(i))
    }

    pub fn core(&self, i: usize, j: usize) -> Result<&Matrix<T>> {
        self.cores.get(&(i, j)).ok_or(Error::UndeclaredRelation(i, j))
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.factors.iter().map(|g| g.cols()).collect()
    }

    /// `G_i S_ij G_jᵀ`.
    pub fn reconstruct(&self, i: usize, j: usize) -> Result<Matrix<T>> {
        let s = self.core(i, j)?;
        self.factor(i)?.matmul(s)?.matmul_t(self.factor(j)?)
    }

    /// Checks that every core conforms to the factor ranks.
    pub fn check_shapes(&self) -> Result<()> {
        for (&(i, j), s) in &self.cores {
            let gi = self.factor(i)?;
            let gj = self.factor(j)?;
            if s.shape() != (gi.cols(), gj.cols()) {
                return Err(Error::DimensionMismatch {
                    op: "core shape",
                    left: s.shape(),
                    right: (gi.cols(), gj.cols()),
                });
            }
        }
        let m = self.num_types();
        if self.relation_weights.shape() != (m, m) || self.view_weights.rows() != m {
            return Err(Error::DimensionMismatch {
                op: "weight shape",
                left: self.relation_weights.shape(),
                right: self.view_weights.shape(),
            });
        }
        Ok(())
    }
}
