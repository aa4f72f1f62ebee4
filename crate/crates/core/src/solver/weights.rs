//! Exact weight step: each simplex row of `W^r` / `W^h` minimizes
//! `Σ_j w_j e_j + ridge · Σ_j w_j²` subject to `w ≥ 0`, `Σ w = 1`.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::solver::config::{SolverConfig, WeightScope};
use crate::solver::model::FactorModel;
use crate::solver::objective::{relation_residuals, view_costs};
use crate::solver::problem::Problem;

/// Closed-form minimizer of `Σ w_j e_j + ridge Σ w_j²` on the probability simplex.
///
/// The KKT conditions give `w_j = max(0, (λ − e_j) / (2·ridge))` with `λ`
/// fixed by `Σ w = 1`; costs may be negative.
pub fn water_fill<T: Scalar>(costs: &[T], ridge: T) -> Result<Vec<T>> {
    let n = costs.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if !(ridge > T::zero()) || !ridge.is_finite() {
        return Err(Error::InvalidConfig(format!("weight ridge must be > 0, got {ridge}")));
    }
    if costs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("weight-step costs".into()));
    }
    if n == 1 {
        return Ok(vec![T::one()]);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| costs[a].partial_cmp(&costs[b]).unwrap_or(std::cmp::Ordering::Equal));
    let two_ridge = T::lit(2.0) * ridge;
    // Largest active set whose level λ clears the last admitted cost.
    let mut prefix = T::zero();
    let mut lambda = T::zero();
    for (k, &idx) in order.iter().enumerate() {
        prefix += costs[idx];
        let count = T::from_usize_lossy(k + 1);
        let candidate = (two_ridge + prefix) / count;
        if k == 0 || candidate > costs[idx] {
            lambda = candidate;
        } else {
            break;
        }
    }
    let mut w: Vec<T> = costs
        .iter()
        .map(|&e| ((lambda - e) / two_ridge).max(T::zero()))
        .collect();
    let total: T = w.iter().copied().sum();
    for v in &mut w {
        *v /= total;
    }
    Ok(w)
}

/// Uniform weights over the declared blocks of each simplex group.
pub(crate) fn uniform_weights<T: Scalar>(problem: &Problem<'_, T>, scope: WeightScope) -> (Matrix<T>, Matrix<T>) {
    let m = problem.num_types;
    let mut wr = Matrix::zeros(m, m);
    let mut wh = Matrix::zeros(m, problem.max_views);
    let rel_keys: Vec<_> = problem.relations.iter().map(|r| (r.source, r.target)).collect();
    let view_keys: Vec<_> = problem.views.iter().map(|v| (v.type_id, v.view)).collect();
    for (keys, target) in [(&rel_keys, &mut wr), (&view_keys, &mut wh)] {
        for &(r, c) in keys.iter() {
            let members = match scope {
                WeightScope::Global => keys.len(),
                WeightScope::PerRow => keys.iter().filter(|k| k.0 == r).count(),
            };
            target[(r, c)] = T::one() / T::from_usize_lossy(members);
        }
    }
    (wr, wh)
}

/// Unit weight on every declared block (frozen-weight modes).
pub(crate) fn unit_weights<T: Scalar>(problem: &Problem<'_, T>) -> (Matrix<T>, Matrix<T>) {
    let mut wr = Matrix::zeros(problem.num_types, problem.num_types);
    let mut wh = Matrix::zeros(problem.num_types, problem.max_views);
    for r in &problem.relations {
        wr[(r.source, r.target)] = T::one();
    }
    for v in &problem.views {
        wh[(v.type_id, v.view)] = T::one();
    }
    (wr, wh)
}

fn fill_groups<T: Scalar>(
    keys: &[(usize, usize)],
    costs: &[T],
    ridge: T,
    scope: WeightScope,
    out: &mut Matrix<T>,
) -> Result<()> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    match scope {
        WeightScope::Global => groups.push((0..keys.len()).collect()),
        WeightScope::PerRow => {
            for row in 0..out.rows() {
                groups.push((0..keys.len()).filter(|&p| keys[p].0 == row).collect());
            }
        }
    }
    for group in groups.into_iter().filter(|g| !g.is_empty()) {
        let group_costs: Vec<T> = group.iter().map(|&p| costs[p]).collect();
        let w = water_fill(&group_costs, ridge)?;
        for (&p, wv) in group.iter().zip(w) {
            out[keys[p]] = wv;
        }
    }
    Ok(())
}

/// Recomputes `W^r` and `W^h` in place from the current factors and cores.
pub fn update_weights_in<T: Scalar>(
    problem: &Problem<'_, T>,
    model: &mut FactorModel<T>,
    config: &SolverConfig<T>,
) -> Result<()> {
    if !problem.mode.learns_weights() {
        let (wr, wh) = unit_weights(problem);
        model.relation_weights = wr;
        model.view_weights = wh;
        return Ok(());
    }
    let residuals = relation_residuals(problem, model)?;
    let costs = view_costs(problem, model)?;
    let rel_keys: Vec<_> = problem.relations.iter().map(|r| (r.source, r.target)).collect();
    let view_keys: Vec<_> = problem.views.iter().map(|v| (v.type_id, v.view)).collect();
    let mut wr = Matrix::zeros(problem.num_types, problem.num_types);
    let mut wh = Matrix::zeros(problem.num_types, problem.max_views);
    fill_groups(&rel_keys, &residuals, config.alpha, config.weight_scope, &mut wr)?;
    fill_groups(&view_keys, &costs, config.beta, config.weight_scope, &mut wh)?;
    model.relation_weights = wr;
    model.view_weights = wh;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qp_value(w: &[f64], e: &[f64], ridge: f64) -> f64 {
        w.iter().zip(e).map(|(w, e)| w * e + ridge * w * w).sum()
    }

    /// Projected gradient descent with sort-free bisection projection.
    fn pgd_oracle(e: &[f64], ridge: f64) -> Vec<f64> {
        let n = e.len();
        let mut w = vec![1.0 / n as f64; n];
        let step = 1.0 / (2.0 * ridge);
        for _ in 0..20_000 {
            let y: Vec<f64> = w.iter().zip(e).map(|(w, e)| w - step * (e + 2.0 * ridge * w)).collect();
            let (mut lo, mut hi) = (-1e6_f64, 1e6_f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let s: f64 = y.iter().map(|v| (v - mid).max(0.0)).sum();
                if s > 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            w = y.iter().map(|v| (v - 0.5 * (lo + hi)).max(0.0)).collect();
        }
        w
    }

    #[test]
    fn equal_costs_give_equal_weights() {
        for ridge in [1e-3, 1.0, 1e6] {
            let w = water_fill::<f64>(&[3.0, 3.0], ridge).unwrap();
            assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn dominated_source_gets_zero() {
        let w = water_fill::<f64>(&[0.0, 10.0], 0.5).unwrap();
        assert_eq!(w, vec![1.0, 0.0]);
        let oracle = pgd_oracle(&[0.0, 10.0], 0.5);
        assert!((oracle[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn huge_ridge_tends_to_uniform() {
        let w = water_fill::<f64>(&[0.0, 10.0], 1e12).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-5 && (w[1] - 0.5).abs() < 1e-5);
    }

    #[test]
    fn signed_costs_are_allowed() {
        let e = [-4.0, 1.0, 0.5];
        let w = water_fill(&e, 2.0).unwrap();
        let oracle = pgd_oracle(&e, 2.0);
        assert!((qp_value(&w, &e, 2.0) - qp_value(&oracle, &e, 2.0)).abs() < 1e-9);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_ridge_rejected() {
        assert!(water_fill(&[1.0, 2.0], 0.0).is_err());
    }

    #[test]
    fn single_source_gets_full_weight() {
        assert_eq!(water_fill(&[123.0], 1.0).unwrap(), vec![1.0]);
    }
}
