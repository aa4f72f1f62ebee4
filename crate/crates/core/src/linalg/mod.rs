//! Matrix kernels used by the solver: products, norms, trace forms, signed
//! splitting and the closed-form core solve.

mod decomp;
mod dense;
mod sparse;

pub use decomp::{
    factor_gram, solve_sylvester_least_squares, symmetric_eigen, truncated_svd, Cholesky,
    GRAM_DAMPING,
};
pub(crate) use decomp::solve_core_from_projection;
pub use dense::{frobenius_sq, split_signed, trace_form, Mask, Matrix};
pub use sparse::{Block, SparseMatrix, SPARSE_DENSITY_THRESHOLD};
