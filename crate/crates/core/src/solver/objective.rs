use crate::error::{Error, Result};
use crate::graph::FusionGraph;
use crate::linalg::{frobenius_sq, trace_form, Matrix};
use crate::scalar::Scalar;
use crate::solver::config::SolverConfig;
use crate::solver::model::FactorModel;
use crate::solver::problem::Problem;

/// The objective split by term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveTerms<T> {
    /// `Σ W^r_ij ‖R_ij − G_i S_ij G_jᵀ‖²` over observed entries.
    pub relations: T,
    /// `Σ W^h_pt tr(G_pᵀ Θ_p^(t) G_p)`.
    pub views: T,
    /// `‖R_bm − R_bi G_i S_im G_mᵀ‖²` over observed entries of `R_bm`.
    pub dispatch: T,
    /// `α‖vec W^r‖² + β‖vec W^h‖²`.
    pub ridge: T,
}

impl<T: Scalar> ObjectiveTerms<T> {
    pub fn total(&self) -> T {
        self.relations + self.views + self.dispatch + self.ridge
    }
}

/// Evaluates the objective of `model` on `graph` under the terms enabled by `config.mode`.
pub fn objective<T: Scalar>(graph: &FusionGraph<T>, model: &FactorModel<T>, config: &SolverConfig<T>) -> Result<T> {
    objective_terms(graph, model, config).map(|t| t.total())
}

pub fn objective_terms<T: Scalar>(
    graph: &FusionGraph<T>,
    model: &FactorModel<T>,
    config: &SolverConfig<T>,
) -> Result<ObjectiveTerms<T>> {
    let problem = Problem::new(graph, config)?;
    check_model(&problem, model)?;
    evaluate(&problem, model, config.alpha, config.beta)
}

pub(crate) fn check_model<T: Scalar>(problem: &Problem<'_, T>, model: &FactorModel<T>) -> Result<()> {
    model.check_shapes()?;
    if model.num_types() != problem.num_types {
        return Err(Error::DimensionMismatch {
            op: "model types",
            left: (model.num_types(), 0),
            right: (problem.num_types, 0),
        });
    }
    for key in problem.core_keys() {
        model.core(key.0, key.1)?;
    }
    Ok(())
}

/// Masked squared residual of every relation, in declaration order.
pub(crate) fn relation_residuals<T: Scalar>(problem: &Problem<'_, T>, model: &FactorModel<T>) -> Result<Vec<T>> {
    problem
        .relations
        .iter()
        .map(|r| {
            let recon = model.reconstruct(r.source, r.target)?;
            frobenius_sq(&r.data.sub(&recon)?, r.mask.as_ref())
        })
        .collect()
}

/// `tr(G_pᵀ Θ G_p)` of every view, in declaration order.
pub(crate) fn view_costs<T: Scalar>(problem: &Problem<'_, T>, model: &FactorModel<T>) -> Result<Vec<T>> {
    problem
        .views
        .iter()
        .map(|v| trace_form(&model.factors[v.type_id], &v.sym))
        .collect()
}

/// `R_bi G_i S_im G_mᵀ`, the bag-level aggregate of instance predictions.
pub(crate) fn dispatch_reconstruction<T: Scalar>(problem: &Problem<'_, T>, model: &FactorModel<T>) -> Result<Option<Matrix<T>>> {
    let Some(d) = &problem.dispatch else {
        return Ok(None);
    };
    let lifted = d.membership.matmul_dense(&model.factors[d.instance])?;
    let recon = lifted
        .matmul(model.core(d.instance, d.label)?)?
        .matmul_t(&model.factors[d.label])?;
    Ok(Some(recon))
}

pub(crate) fn evaluate<T: Scalar>(
    problem: &Problem<'_, T>,
    model: &FactorModel<T>,
    alpha: T,
    beta: T,
) -> Result<ObjectiveTerms<T>> {
    let learned = problem.mode.learns_weights();
    let residuals = relation_residuals(problem, model)?;
    let relations = problem
        .relations
        .iter()
        .zip(&residuals)
        .map(|(r, &e)| {
            let w = if learned {
                model.relation_weights[(r.source, r.target)]
            } else {
                T::one()
            };
            w * e
        })
        .sum();
    let costs = view_costs(problem, model)?;
    let views = problem
        .views
        .iter()
        .zip(&costs)
        .map(|(v, &c)| {
            let w = if learned {
                model.view_weights[(v.type_id, v.view)]
            } else {
                T::one()
            };
            w * c
        })
        .sum();
    let dispatch = match (dispatch_reconstruction(problem, model)?, &problem.dispatch) {
        (Some(recon), Some(d)) => {
            let target = &problem.relations[d.bag_label];
            frobenius_sq(&target.data.sub(&recon)?, target.mask.as_ref())?
        }
        _ => T::zero(),
    };
    let ridge = if learned {
        alpha * frobenius_sq(&model.relation_weights, None)? + beta * frobenius_sq(&model.view_weights, None)?
    } else {
        T::zero()
    };
    let terms = ObjectiveTerms {
        relations,
        views,
        dispatch,
        ridge,
    };
    if !terms.total().is_finite() {
        return Err(Error::NonFinite("objective".into()));
    }
    Ok(terms)
}
