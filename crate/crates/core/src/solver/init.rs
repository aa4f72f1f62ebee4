use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::linalg::{truncated_svd, Matrix};
use crate::scalar::Scalar;
use crate::solver::config::{InitScheme, SolverConfig};
use crate::solver::model::FactorModel;
use crate::solver::problem::Problem;
use crate::solver::updates::update_cores;
use crate::solver::weights::{uniform_weights, unit_weights};

/// Mean of the observed entries of every relation touching type `p`.
fn mean_touching<T: Scalar>(problem: &Problem<'_, T>, p: usize) -> T {
    let mut sum = T::zero();
    let mut count = 0usize;
    for rel in problem.relations.iter().filter(|r| r.source == p || r.target == p) {
        for (idx, &v) in rel.data.as_slice().iter().enumerate() {
            let observed = rel.mask.as_ref().is_none_or(|m| m.as_slice()[idx]);
            if observed {
                sum += v;
                count += 1;
            }
        }
    }
    if count == 0 {
        T::zero()
    } else {
        sum / T::from_usize_lossy(count)
    }
}

fn random_factor<T: Scalar>(rows: usize, k: usize, scale: T, rng: &mut ChaCha8Rng) -> Matrix<T> {
    Matrix::from_fn(rows, k, |_, _| {
        // open interval (0, 1): zero entries would stay zero forever
        let u: f64 = rng.random_range(f64::EPSILON..1.0);
        T::lit(u) * scale
    })
}

/// Observed blocks touching type `p`, laid side by side with `p` along the rows.
fn touching_blocks<T: Scalar>(problem: &Problem<'_, T>, p: usize) -> Result<Option<Matrix<T>>> {
    let mut stacked: Option<Matrix<T>> = None;
    for rel in problem.relations.iter().filter(|r| r.source == p || r.target == p) {
        let mut data = rel.data.clone();
        if let Some(mask) = &rel.mask {
            data.fill_unobserved(mask, &Matrix::zeros(data.rows(), data.cols()))?;
        }
        let oriented = if rel.source == p { data } else { data.transpose() };
        stacked = Some(match stacked {
            None => oriented,
            Some(acc) => acc.hstack(&oriented)?,
        });
    }
    Ok(stacked)
}

fn svd_factor<T: Scalar>(problem: &Problem<'_, T>, p: usize, k: usize, rows: usize, scale: T, rng: &mut ChaCha8Rng) -> Result<Matrix<T>> {
    let Some(block) = touching_blocks(problem, p)? else {
        return Ok(random_factor(rows, k, scale, rng));
    };
    let (u, sigma) = truncated_svd(&block, k, rng)?;
    let mut g = Matrix::from_fn(rows, k, |r, c| u[(r, c)].abs() * sigma[c].sqrt());
    // exact zeros are absorbing under multiplicative updates; lift them slightly
    let lift = g.max_abs().max(scale) * T::lit(1e-6);
    for v in g.as_mut_slice() {
        if *v <= T::zero() {
            *v = lift;
        }
    }
    Ok(g)
}

pub(crate) fn initialize_in<T: Scalar>(problem: &Problem<'_, T>, config: &SolverConfig<T>, cardinalities: &[usize]) -> Result<FactorModel<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut factors = Vec::with_capacity(problem.num_types);
    for (p, (&n, &k)) in cardinalities.iter().zip(&problem.ranks).enumerate() {
        let mean = mean_touching(problem, p);
        let scale = if mean > T::zero() {
            (mean / T::from_usize_lossy(k)).sqrt()
        } else {
            T::one()
        };
        let g = match config.init {
            InitScheme::RandomUniform => random_factor(n, k, scale, &mut rng),
            InitScheme::SvdAbs => svd_factor(problem, p, k, n, scale, &mut rng)?,
        };
        factors.push(g);
    }
    let (relation_weights, view_weights) = if problem.mode.learns_weights() {
        uniform_weights(problem, config.weight_scope)
    } else {
        unit_weights(problem)
    };
    let cores: BTreeMap<_, _> = problem
        .core_keys()
        .into_iter()
        .map(|(i, j)| ((i, j), Matrix::zeros(problem.ranks[i], problem.ranks[j])))
        .collect();
    let mut model = FactorModel {
        factors,
        cores,
        relation_weights,
        view_weights,
        history: Vec::new(),
    };
    for (key, s) in update_cores(problem, &model)? {
        model.cores.insert(key, s);
    }
    Ok(model)
}
