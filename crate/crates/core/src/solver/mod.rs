//! Alternating optimization of the joint tri-factorization objective.
//!
//! One sweep updates every factor `G_p` in type order with the multiplicative
//! rule, then solves every core `S_ij` in closed form, then (when weights are
//! learned) solves every weight row exactly. Each step is monotone, so the
//! recorded history is non-increasing up to rounding.
//!
//! Cost per sweep is dominated by the dense products `R_ij G_j` and the
//! reconstructions used for masked entries, i.e. `O(Σ n_i n_j k)` over
//! declared relations plus `O(n_p² k)` per view.

mod config;
mod init;
mod model;
mod objective;
mod problem;
mod updates;
mod weights;

use std::collections::BTreeMap;

pub use config::{InitScheme, Mode, Ranks, SolverConfig, WeightScope, DENOMINATOR_FLOOR};
pub use model::FactorModel;
pub use objective::{objective, objective_terms, ObjectiveTerms};
pub use weights::water_fill;

use crate::error::{Error, Result};
use crate::graph::FusionGraph;
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use problem::Problem;

/// Bookkeeping of one fit beyond the model itself.
#[derive(Clone, Debug, PartialEq)]
pub struct FitSummary<T> {
    pub initial_objective: T,
    pub sweeps: usize,
    pub converged: bool,
}

fn cardinalities<T: Scalar>(graph: &FusionGraph<T>) -> Vec<usize> {
    graph.types().iter().map(|t| t.cardinality).collect()
}

/// Builds the starting model: random or SVD-based factors, least-squares
/// cores and uniform weights. Deterministic in `config.seed`.
pub fn initialize<T: Scalar>(graph: &FusionGraph<T>, config: &SolverConfig<T>) -> Result<FactorModel<T>> {
    let problem = Problem::new(graph, config)?;
    init::initialize_in(&problem, config, &cardinalities(graph))
}

/// One multiplicative update of `G_type_id`, returned without modifying `model`.
pub fn update_g<T: Scalar>(
    graph: &FusionGraph<T>,
    model: &FactorModel<T>,
    config: &SolverConfig<T>,
    type_id: usize,
) -> Result<Matrix<T>> {
    let problem = Problem::new(graph, config)?;
    objective::check_model(&problem, model)?;
    if type_id >= problem.num_types {
        return Err(Error::UnknownType(type_id));
    }
    updates::update_factor(&problem, model, type_id)
}

/// Closed-form cores for the current factors.
pub fn update_s<T: Scalar>(
    graph: &FusionGraph<T>,
    model: &FactorModel<T>,
    config: &SolverConfig<T>,
) -> Result<BTreeMap<(usize, usize), Matrix<T>>> {
    let problem = Problem::new(graph, config)?;
    objective::check_model(&problem, model)?;
    Ok(updates::update_cores(&problem, model)?.into_iter().collect())
}

/// Exact weight step; returns `(W^r, W^h)`.
pub fn update_weights<T: Scalar>(
    graph: &FusionGraph<T>,
    model: &FactorModel<T>,
    config: &SolverConfig<T>,
) -> Result<(Matrix<T>, Matrix<T>)> {
    let problem = Problem::new(graph, config)?;
    objective::check_model(&problem, model)?;
    let mut next = model.clone();
    weights::update_weights_in(&problem, &mut next, config)?;
    Ok((next.relation_weights, next.view_weights))
}

/// Runs the alternating scheme to convergence or the iteration cap.
pub fn fit<T: Scalar>(graph: &FusionGraph<T>, config: &SolverConfig<T>) -> Result<FactorModel<T>> {
    fit_with_summary(graph, config).map(|(m, _)| m)
}

pub fn fit_with_summary<T: Scalar>(
    graph: &FusionGraph<T>,
    config: &SolverConfig<T>,
) -> Result<(FactorModel<T>, FitSummary<T>)> {
    let problem = Problem::new(graph, config)?;
    let model = init::initialize_in(&problem, config, &cardinalities(graph))?;
    run_sweeps(&problem, model, config)
}

/// Continues optimizing an existing model (for example one loaded from disk).
pub fn refine<T: Scalar>(
    graph: &FusionGraph<T>,
    model: FactorModel<T>,
    config: &SolverConfig<T>,
) -> Result<(FactorModel<T>, FitSummary<T>)> {
    let problem = Problem::new(graph, config)?;
    objective::check_model(&problem, &model)?;
    run_sweeps(&problem, model, config)
}

fn run_sweeps<T: Scalar>(
    problem: &Problem<'_, T>,
    mut model: FactorModel<T>,
    config: &SolverConfig<T>,
) -> Result<(FactorModel<T>, FitSummary<T>)> {
    let initial = objective::evaluate(problem, &model, config.alpha, config.beta)?.total();
    let mut previous = initial;
    let mut converged = false;
    let mut sweeps = 0;
    for sweep in 1..=config.max_iters {
        for p in 0..problem.num_types {
            let g = updates::update_factor(problem, &model, p).map_err(|e| match e {
                Error::NonFinite(msg) => Error::NonFinite(format!("sweep {sweep}: {msg}")),
                other => other,
            })?;
            model.factors[p] = g;
        }
        for (key, s) in updates::update_cores(problem, &model)? {
            model.cores.insert(key, s);
        }
        if problem.mode.learns_weights() {
            weights::update_weights_in(problem, &mut model, config)?;
        }
        let current = objective::evaluate(problem, &model, config.alpha, config.beta)
            .map_err(|e| match e {
                Error::NonFinite(msg) => Error::NonFinite(format!("sweep {sweep}: {msg}")),
                other => other,
            })?
            .total();
        model.history.push(current);
        sweeps = sweep;

        let scale = previous.abs().max(T::min_positive_value());
        let relative = (previous - current) / scale;
        if config.abort_on_divergence && -relative > config.divergence_slack {
            return Err(Error::Divergence {
                sweep,
                previous: previous.as_f64(),
                current: current.as_f64(),
                relative: (-relative).as_f64(),
            });
        }
        previous = current;
        if relative < config.rel_tol {
            converged = true;
            break;
        }
    }
    Ok((
        model,
        FitSummary {
            initial_objective: initial,
            sweeps,
            converged,
        },
    ))
}
