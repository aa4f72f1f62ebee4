//! Collective nonnegative matrix tri-factorization over heterogeneous fusion
//! graphs, with learned per-source weights and a bag/instance aggregation
//! term for multi-instance multi-label prediction.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which evaluation and the file formats use.

pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod predict;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = linalg::Matrix<f64>;
pub type SparseMatrix = linalg::SparseMatrix<f64>;
pub type Block = linalg::Block<f64>;
pub type FusionGraph = graph::FusionGraph<f64>;
pub type InterRelation = graph::InterRelation<f64>;
pub type IntraView = graph::IntraView<f64>;
pub type FactorModel = solver::FactorModel<f64>;
pub type SolverConfig = solver::SolverConfig<f64>;
pub type ScoreMatrix = predict::ScoreMatrix<f64>;
