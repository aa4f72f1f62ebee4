//! Factor and core steps.
//!
//! Every term of the objective in which `G_p` appears has the shape
//! `const − 2 tr(G_pᵀ B) + tr(G_pᵀ Q G_p A)` with `Q ≥ 0` entrywise and `A`
//! symmetric. Splitting `B = B⁺ − B⁻` and `A = A⁺ − A⁻` and summing over
//! terms gives
//!
//! ```text
//! Num = Σ B⁺ + Q G_p A⁻        Den = Σ B⁻ + Q G_p A⁺
//! G_p ← G_p ∘ sqrt(Num / max(Den, ε))
//! ```
//!
//! which minimizes the usual auxiliary function of semi-nonnegative
//! tri-factorization, so a step never increases the objective (barring the
//! ε floor). The trace term is `Q = Θ±`, `A = I`; the residual terms take
//! `Q = I`; the dispatch term for the instance factor takes `Q = R_biᵀR_bi`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{solve_core_from_projection, split_signed, Matrix};
use crate::scalar::Scalar;
use crate::solver::config::DENOMINATOR_FLOOR;
use crate::solver::model::FactorModel;
use crate::solver::problem::{impute, Problem};

struct Accumulator<T> {
    num: Matrix<T>,
    den: Matrix<T>,
}

impl<T: Scalar> Accumulator<T> {
    fn new(rows: usize, cols: usize) -> Self {
        Accumulator {
            num: Matrix::zeros(rows, cols),
            den: Matrix::zeros(rows, cols),
        }
    }

    /// Adds `weight · (−2 tr(Gᵀ B) + tr(Gᵀ Q G A))` given `B` and `QG`.
    fn add_term(&mut self, weight: T, b: &Matrix<T>, qg: &Matrix<T>, a: &Matrix<T>) -> Result<()> {
        let (b_plus, b_minus) = split_signed(b);
        let (a_plus, a_minus) = split_signed(a);
        self.num.axpy(weight, &b_plus)?;
        self.num.axpy(weight, &qg.matmul(&a_minus)?)?;
        self.den.axpy(weight, &b_minus)?;
        self.den.axpy(weight, &qg.matmul(&a_plus)?)?;
        Ok(())
    }

    /// Adds `weight · tr(Gᵀ Θ G)` with `Θ = Θ⁺ − Θ⁻`.
    fn add_trace(&mut self, weight: T, theta_plus: &Matrix<T>, theta_minus: &Matrix<T>, g: &Matrix<T>) -> Result<()> {
        self.num.axpy(weight, &theta_minus.matmul(g)?)?;
        self.den.axpy(weight, &theta_plus.matmul(g)?)?;
        Ok(())
    }
}

fn relation_weight<T: Scalar>(problem: &Problem<'_, T>, model: &FactorModel<T>, i: usize, j: usize) -> T {
    if problem.mode.learns_weights() {
        model.relation_weights[(i, j)]
    } else {
        T::one()
    }
}

fn view_weight<T: Scalar>(problem: &Problem<'_, T>, model: &FactorModel<T>, p: usize, t: usize) -> T {
    if problem.mode.learns_weights() {
        model.view_weights[(p, t)]
    } else {
        T::one()
    }
}

/// Multiplicative update of `G_p`; returns the new factor without committing it.
pub(crate) fn update_factor<T: Scalar>(problem: &Problem<'_, T>, model: &FactorModel<T>, p: usize) -> Result<Matrix<T>> {
    let g = &model.factors[p];
    let mut acc = Accumulator::new(g.rows(), g.cols());

    for rel in &problem.relations {
        if rel.source != p && rel.target != p {
            continue;
        }
        let w = relation_weight(problem, model, rel.source, rel.target);
        if w == T::zero() {
            continue;
        }
        let s = model.core(rel.source, rel.target)?;
        let gi = &model.factors[rel.source];
        let gj = &model.factors[rel.target];
        let data = match &rel.mask {
            Some(mask) => impute(&rel.data, Some(mask), &gi.matmul(s)?.matmul_t(gj)?)?,
            None => rel.data.clone(),
        };
        if rel.source == p {
            // ‖R − G S Gjᵀ‖²: B = R Gj Sᵀ, A = S GjᵀGj Sᵀ
            let b = data.matmul(gj)?.matmul_t(s)?;
            let a = s.matmul(&gj.gram())?.matmul_t(s)?;
            acc.add_term(w, &b, g, &a)?;
        }
        if rel.target == p {
            // ‖Rᵀ − G Sᵀ Giᵀ‖²: B = Rᵀ Gi S, A = Sᵀ GiᵀGi S
            let b = data.t_matmul(gi)?.matmul(s)?;
            let a = s.t_matmul(&gi.gram().matmul(s)?)?;
            acc.add_term(w, &b, g, &a)?;
        }
    }

    for view in problem.views.iter().filter(|v| v.type_id == p) {
        let w = view_weight(problem, model, view.type_id, view.view);
        if w != T::zero() {
            acc.add_trace(w, &view.plus, &view.minus, g)?;
        }
    }

    if let Some(d) = &problem.dispatch {
        if p == d.instance || p == d.label {
            let target = &problem.relations[d.bag_label];
            let s = model.core(d.instance, d.label)?;
            let gi = &model.factors[d.instance];
            let gm = &model.factors[d.label];
            let lifted = d.membership.matmul_dense(gi)?;
            let data = match &target.mask {
                Some(mask) => impute(&target.data, Some(mask), &lifted.matmul(s)?.matmul_t(gm)?)?,
                None => target.data.clone(),
            };
            if p == d.label {
                // ‖R_bmᵀ − G_m Sᵀ (R_bi G_i)ᵀ‖²
                let b = data.t_matmul(&lifted)?.matmul(s)?;
                let a = s.t_matmul(&lifted.gram().matmul(s)?)?;
                acc.add_term(T::one(), &b, g, &a)?;
            }
            if p == d.instance {
                // B = R_biᵀ R_bm G_m Sᵀ, Q = R_biᵀ R_bi, A = S G_mᵀG_m Sᵀ
                let projected = data.matmul(gm)?.matmul_t(s)?;
                let b = transpose_product(d.membership, &projected)?;
                let qg = transpose_product(d.membership, &lifted)?;
                let a = s.matmul(&gm.gram())?.matmul_t(s)?;
                acc.add_term(T::one(), &b, &qg, &a)?;
            }
        }
    }

    let floor = T::lit(DENOMINATOR_FLOOR);
    let mut next = g.clone();
    for ((v, &num), &den) in next
        .as_mut_slice()
        .iter_mut()
        .zip(acc.num.as_slice())
        .zip(acc.den.as_slice())
    {
        *v *= (num / den.max(floor)).sqrt();
    }
    if !next.is_finite() {
        return Err(Error::NonFinite(format!("factor update of type {p}")));
    }
    Ok(next)
}

/// `Mᵀ X` for the membership block, using sparse storage when present.
fn transpose_product<T: Scalar>(membership: &crate::linalg::Block<T>, x: &Matrix<T>) -> Result<Matrix<T>> {
    match membership {
        crate::linalg::Block::Dense(m) => m.t_matmul(x),
        crate::linalg::Block::Sparse(s) => s.transpose().matmul_dense(x),
    }
}

/// Closed-form solve of every core given the current factors. Cores are
/// independent of each other, so they are solved in parallel and collected
/// in key order.
pub(crate) fn update_cores<T: Scalar>(problem: &Problem<'_, T>, model: &FactorModel<T>) -> Result<Vec<((usize, usize), Matrix<T>)>> {
    let keys = problem.core_keys();
    keys.par_iter()
        .map(|&key| solve_core(problem, model, key).map(|s| (key, s)))
        .collect()
}

fn solve_core<T: Scalar>(problem: &Problem<'_, T>, model: &FactorModel<T>, (i, j): (usize, usize)) -> Result<Matrix<T>> {
    let gi = &model.factors[i];
    let gj = &model.factors[j];
    let current = model.core(i, j)?;
    let relation = problem
        .relations
        .iter()
        .find(|r| (r.source, r.target) == (i, j));

    // Accumulate GiᵀR̂Gj-style normal equations term by term:
    // Σ_t L_tᵀ L_t · S · GjᵀGj = Σ_t L_tᵀ R̂_t Gj, all terms sharing the right factor Gj.
    let mut left_gram = Matrix::zeros(gi.cols(), gi.cols());
    let mut projected = Matrix::zeros(gi.cols(), gj.cols());

    if let Some(rel) = relation {
        let w = relation_weight(problem, model, i, j);
        if w > T::zero() {
            let data = match &rel.mask {
                Some(mask) => impute(&rel.data, Some(mask), &gi.matmul(current)?.matmul_t(gj)?)?,
                None => rel.data.clone(),
            };
            left_gram.axpy(w, &gi.gram())?;
            projected.axpy(w, &gi.t_matmul(&data)?.matmul(gj)?)?;
        }
    }

    if let Some(d) = &problem.dispatch {
        if (i, j) == (d.instance, d.label) {
            let target = &problem.relations[d.bag_label];
            let lifted = d.membership.matmul_dense(gi)?;
            let data = match &target.mask {
                Some(mask) => impute(&target.data, Some(mask), &lifted.matmul(current)?.matmul_t(gj)?)?,
                None => target.data.clone(),
            };
            left_gram.add_assign(&lifted.gram())?;
            projected.add_assign(&lifted.t_matmul(&data)?.matmul(gj)?)?;
        }
    }

    if relation.is_none() && !problem.dispatch.as_ref().is_some_and(|d| (i, j) == (d.instance, d.label)) {
        return Err(Error::UndeclaredRelation(i, j));
    }
    if left_gram.max_abs() == T::zero() {
        // Core does not enter the objective (zero weight): keep it.
        return Ok(current.clone());
    }
    solve_core_from_projection(&left_gram, &projected, &gj.gram())
        .map_err(|e| match e {
            Error::NonFinite(msg) => Error::NonFinite(format!("core ({i},{j}): {msg}")),
            other => other,
        })
}
