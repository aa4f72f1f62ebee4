//! Association scores and discrete label assignments from a fitted model.

use crate::error::{Error, Result};
use crate::graph::FusionGraph;
use crate::linalg::{Mask, Matrix};
use crate::scalar::Scalar;
use crate::solver::FactorModel;

/// Scores for one relation, optionally with a top-K binarization.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix<T> {
    pub relation: (usize, usize),
    pub scores: Matrix<T>,
    /// 0/1 assignment; `true` marks a predicted association.
    pub binarized: Option<Mask>,
    pub k: Option<usize>,
}

impl<T: Scalar> ScoreMatrix<T> {
    pub fn new(relation: (usize, usize), scores: Matrix<T>) -> Self {
        ScoreMatrix {
            relation,
            scores,
            binarized: None,
            k: None,
        }
    }

    /// Returns `self` with the top-`k` binarization attached.
    pub fn with_top_k(mut self, k: usize) -> Self {
        self.binarized = Some(top_k(&self.scores, k));
        self.k = Some(k);
        self
    }
}

/// How instance scores are pooled into a bag.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Aggregation {
    /// `R_bi · scores`, as in the dispatch term.
    #[default]
    Sum,
    /// Row-normalized `R_bi`; empty bags stay zero.
    Mean,
}

/// Source of bag-level label scores.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BagScoring {
    /// `G_b S_bm G_mᵀ`.
    Direct,
    /// Instance scores summed over each bag.
    Aggregated,
    /// Aggregated when the model carries an instance-label core, else direct.
    #[default]
    Auto,
}

/// `G_i S_ij G_jᵀ` for a relation the model carries a core for.
pub fn reconstruct<T: Scalar>(model: &FactorModel<T>, i: usize, j: usize) -> Result<ScoreMatrix<T>> {
    Ok(ScoreMatrix::new((i, j), model.reconstruct(i, j)?))
}

/// Bag-level scores `R_bi · (G_i S_im G_mᵀ)`.
pub fn aggregate_bag_scores<T: Scalar>(
    model: &FactorModel<T>,
    graph: &FusionGraph<T>,
    aggregation: Aggregation,
) -> Result<ScoreMatrix<T>> {
    let roles = graph.require_roles()?;
    let membership = &graph.membership()?.matrix;
    let instance_scores = model.reconstruct(roles.instance, roles.label)?;
    let mut scores = membership.matmul_dense(&instance_scores)?;
    if aggregation == Aggregation::Mean {
        let mut sizes = vec![T::zero(); scores.rows()];
        membership.for_each_nonzero(|r, _, v| sizes[r] += v);
        for (r, &size) in sizes.iter().enumerate() {
            if size > T::zero() {
                scores.row_mut(r).iter_mut().for_each(|v| *v /= size);
            }
        }
    }
    Ok(ScoreMatrix::new((roles.bag, roles.label), scores))
}

/// Bag-by-label scores according to `scoring`.
pub fn bag_scores<T: Scalar>(model: &FactorModel<T>, graph: &FusionGraph<T>, scoring: BagScoring) -> Result<ScoreMatrix<T>> {
    let roles = graph.require_roles()?;
    let aggregated = match scoring {
        BagScoring::Direct => false,
        BagScoring::Aggregated => true,
        BagScoring::Auto => model.cores.contains_key(&(roles.instance, roles.label)),
    };
    if aggregated {
        aggregate_bag_scores(model, graph, Aggregation::Sum)
    } else {
        reconstruct(model, roles.bag, roles.label)
    }
}

/// Marks the `k` largest finite entries of every row; ties go to the lower
/// column index.
pub fn top_k<T: Scalar>(scores: &Matrix<T>, k: usize) -> Mask {
    let mut out = Mask::none(scores.rows(), scores.cols());
    let mut order = Vec::with_capacity(scores.cols());
    for r in 0..scores.rows() {
        let row = scores.row(r);
        order.clear();
        order.extend((0..row.len()).filter(|&c| row[c].is_finite()));
        order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).expect("finite").then(a.cmp(&b)));
        for &c in order.iter().take(k) {
            out.set(r, c, true);
        }
    }
    out
}

/// Reading of "the next integer" above the average label count.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum KRule {
    /// `ceil(avg)`: an integral average maps to itself.
    #[default]
    Ceiling,
    /// `floor(avg) + 1`.
    FloorPlusOne,
}

/// Number of labels to assign per row, from the training labels.
///
/// The average runs over rows with at least one observed entry; `observed`
/// defaults to every entry.
pub fn choose_k(labels: &Mask, observed: Option<&Mask>, rule: KRule) -> Result<usize> {
    if let Some(obs) = observed {
        if obs.shape() != labels.shape() {
            return Err(Error::DimensionMismatch {
                op: "choose_k",
                left: labels.shape(),
                right: obs.shape(),
            });
        }
    }
    let seen = |r: usize, c: usize| observed.is_none_or(|m| m.get(r, c));
    let mut positives = 0usize;
    let mut rows = 0usize;
    for r in 0..labels.rows() {
        if (0..labels.cols()).any(|c| seen(r, c)) {
            rows += 1;
            positives += (0..labels.cols()).filter(|&c| seen(r, c) && labels.get(r, c)).count();
        }
    }
    if rows == 0 {
        return Err(Error::Eval("no labeled rows to choose K from".into()));
    }
    // integer arithmetic keeps exact averages exact
    let k = match rule {
        KRule::Ceiling => positives.div_ceil(rows),
        KRule::FloorPlusOne => positives / rows + 1,
    };
    Ok(k.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{InterRelation, ObjectType, Roles};
    use std::collections::BTreeMap;

    fn model_with(factors: Vec<Matrix<f64>>, cores: Vec<((usize, usize), Matrix<f64>)>) -> FactorModel<f64> {
        let m = factors.len();
        FactorModel {
            factors,
            cores: cores.into_iter().collect::<BTreeMap<_, _>>(),
            relation_weights: Matrix::zeros(m, m),
            view_weights: Matrix::zeros(m, 0),
            history: vec![],
        }
    }

    #[test]
    fn identity_factors_give_core() {
        let s = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let model = model_with(vec![Matrix::identity(2), Matrix::identity(2)], vec![((0, 1), s.clone())]);
        assert_eq!(reconstruct(&model, 0, 1).unwrap().scores, s);
        assert!(matches!(reconstruct(&model, 1, 0), Err(Error::UndeclaredRelation(1, 0))));
    }

    fn bag_graph(membership: Matrix<f64>) -> FusionGraph<f64> {
        let (b, i) = membership.shape();
        FusionGraph::new(
            vec![ObjectType::new("bag", b), ObjectType::new("inst", i), ObjectType::new("label", 2)],
            vec![
                InterRelation::new(0, 1, membership),
                InterRelation::new(0, 2, Matrix::zeros(b, 2)),
            ],
            vec![],
            Roles::bag_target(0, 1, 2),
        )
    }

    #[test]
    fn bag_sums_instance_rows() {
        let graph = bag_graph(Matrix::from_rows(&[[1.0, 1.0], [0.0, 0.0]]));
        let model = model_with(
            vec![Matrix::zeros(2, 2), Matrix::identity(2), Matrix::identity(2)],
            vec![((1, 2), Matrix::identity(2))],
        );
        let bags = aggregate_bag_scores(&model, &graph, Aggregation::Sum).unwrap();
        assert_eq!(bags.scores, Matrix::from_rows(&[[1.0, 1.0], [0.0, 0.0]]));
        assert_eq!(bags.relation, (0, 2));
        let mean = aggregate_bag_scores(&model, &graph, Aggregation::Mean).unwrap();
        assert_eq!(mean.scores, Matrix::from_rows(&[[0.5, 0.5], [0.0, 0.0]]));
    }

    #[test]
    fn auto_scoring_falls_back_to_direct() {
        let graph = bag_graph(Matrix::identity(2));
        let direct = Matrix::from_rows(&[[0.0, 7.0], [7.0, 0.0]]);
        let model = model_with(
            vec![Matrix::identity(2), Matrix::identity(2), Matrix::identity(2)],
            vec![((0, 2), direct.clone())],
        );
        assert_eq!(bag_scores(&model, &graph, BagScoring::Auto).unwrap().scores, direct);
        assert!(bag_scores(&model, &graph, BagScoring::Aggregated).is_err());
    }

    #[test]
    fn top_k_examples() {
        let rows = |m: &Mask| -> Vec<bool> { m.as_slice().to_vec() };
        let s = Matrix::from_rows(&[[0.9, 0.1, 0.5]]);
        assert_eq!(rows(&top_k(&s, 1)), [true, false, false]);
        let tied = Matrix::from_rows(&[[0.5, 0.5, 0.1]]);
        assert_eq!(rows(&top_k(&tied, 1)), [true, false, false]);
        assert_eq!(rows(&top_k(&s, 5)), [true, true, true]);
        let with_nan = Matrix::from_rows(&[[f64::NAN, 0.2, 0.1]]);
        assert_eq!(rows(&top_k(&with_nan, 3)), [false, true, true]);
    }

    #[test]
    fn choose_k_rules() {
        let labels = Mask::from_fn(10, 5, |r, c| c < 2 || (c == 2 && r < 3));
        assert_eq!(choose_k(&labels, None, KRule::Ceiling).unwrap(), 3);
        let two = Mask::from_fn(4, 5, |_, c| c < 2);
        assert_eq!(choose_k(&two, None, KRule::Ceiling).unwrap(), 2);
        assert_eq!(choose_k(&two, None, KRule::FloorPlusOne).unwrap(), 3);
        let four = Mask::from_fn(1, 6, |_, c| c < 4);
        assert_eq!(choose_k(&four, None, KRule::Ceiling).unwrap(), 4);
        let unobserved = Mask::none(4, 5);
        assert!(choose_k(&two, Some(&unobserved), KRule::Ceiling).is_err());
    }
}
