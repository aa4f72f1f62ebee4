mod common;

use common::{random_graph, rng, uniform_matrix};
use fusionmf::graph::{FusionGraph, InterRelation, IntraView, ObjectType, Roles};
use fusionmf::linalg::{frobenius_sq, solve_sylvester_least_squares, trace_form, Matrix};
use fusionmf::solver::*;
use fusionmf::Error;

fn two_type(r: Matrix<f64>) -> FusionGraph<f64> {
    let (a, b) = r.shape();
    FusionGraph::unstructured(
        vec![ObjectType::new("a", a), ObjectType::new("b", b)],
        vec![InterRelation::new(0, 1, r)],
        vec![],
    )
}

fn dfmf(rank: usize) -> SolverConfig<f64> {
    SolverConfig::default().with_rank(rank).with_mode(Mode::Dfmf)
}

#[test]
fn fixed_point_leaves_factor_unchanged() {
    let mut rng = rng(1);
    let g0 = uniform_matrix(&mut rng, 5, 2, 0.1, 1.0);
    let g1 = uniform_matrix(&mut rng, 4, 2, 0.1, 1.0);
    let s = Matrix::from_rows(&[[1.0, -0.3], [0.2, 0.8]]);
    let r = g0.matmul(&s).unwrap().matmul_t(&g1).unwrap();
    let graph = two_type(r.map(|v| v.max(0.0)));
    assert!(r.as_slice().iter().all(|&v| v >= 0.0), "choose a nonnegative product");
    let config = dfmf(2);
    let mut model = initialize(&graph, &config).unwrap();
    model.factors = vec![g0.clone(), g1];
    model.cores.insert((0, 1), s);
    let next = update_g(&graph, &model, &config, 0).unwrap();
    assert!(next.sub(&g0).unwrap().max_abs() < 1e-10);
}

#[test]
fn one_factor_step_does_not_increase_objective() {
    for seed in 0..20 {
        let mut rng = rng(seed);
        let graph = two_type(uniform_matrix(&mut rng, 4, 3, 0.0, 1.0));
        let config = dfmf(2).with_seed(seed);
        let mut model = initialize(&graph, &config).unwrap();
        for p in 0..2 {
            let before = objective(&graph, &model, &config).unwrap();
            model.factors[p] = update_g(&graph, &model, &config, p).unwrap();
            let after = objective(&graph, &model, &config).unwrap();
            assert!(after <= before * (1.0 + 1e-12), "seed {seed} type {p}: {before} -> {after}");
        }
    }
}

#[test]
fn cannot_link_view_shrinks_trace() {
    let mut rng = rng(3);
    let theta = Matrix::from_fn(5, 5, |r, c| if r == c { 0.0 } else { 5.0 });
    let graph = FusionGraph::unstructured(
        vec![ObjectType::new("a", 5), ObjectType::new("b", 4)],
        vec![InterRelation::new(0, 1, uniform_matrix(&mut rng, 5, 4, 0.0, 1.0))],
        vec![IntraView::new(0, 0, theta.clone())],
    );
    let config = dfmf(2);
    let model = initialize(&graph, &config).unwrap();
    let before = trace_form(&model.factors[0], &theta).unwrap();
    let next = update_g(&graph, &model, &config, 0).unwrap();
    let after = trace_form(&next, &theta).unwrap();
    assert!(after < before, "{before} -> {after}");
}

#[test]
fn identity_factors_give_data_as_core() {
    let r = Matrix::from_rows(&[[1.0, 2.0, 0.0], [0.5, 0.0, 3.0], [0.0, 1.0, 1.0]]);
    let graph = two_type(r.clone());
    let config = dfmf(3);
    let mut model = initialize(&graph, &config).unwrap();
    model.factors = vec![Matrix::identity(3), Matrix::identity(3)];
    let cores = update_s(&graph, &model, &config).unwrap();
    assert!(cores[&(0, 1)].sub(&r).unwrap().max_abs() < 1e-12);
}

/// Bags, instances, labels with `R_bi`, `R_bm` and `R_im` all declared.
fn dispatch_graph(seed: u64) -> FusionGraph<f64> {
    let mut rng = rng(seed);
    let membership = Matrix::from_fn(4, 8, |r, c| if c % 4 == r { 1.0 } else { 0.0 });
    FusionGraph::new(
        vec![ObjectType::new("bag", 4), ObjectType::new("inst", 8), ObjectType::new("label", 5)],
        vec![
            InterRelation::new(0, 1, membership),
            InterRelation::new(0, 2, uniform_matrix(&mut rng, 4, 5, 0.0, 1.0)),
            InterRelation::new(1, 2, uniform_matrix(&mut rng, 8, 5, 0.0, 1.0)),
        ],
        vec![],
        Roles::bag_target(0, 1, 2),
    )
}

/// Least squares `min ‖y − A x‖²` through the normal equations and Gaussian
/// elimination with partial pivoting.
fn lstsq(a: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = a[0].len();
    let mut m = vec![vec![0.0; n + 1]; n];
    for (row, &yv) in a.iter().zip(y) {
        for i in 0..n {
            for j in 0..n {
                m[i][j] += row[i] * row[j];
            }
            m[i][n] += row[i] * yv;
        }
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &z| m[x][col].abs().total_cmp(&m[z][col].abs())).unwrap();
        m.swap(col, pivot);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    (0..n).map(|i| m[i][n] / m[i][i]).collect()
}

#[test]
fn stacked_core_solve_matches_explicit_least_squares() {
    let graph = dispatch_graph(5);
    let config = SolverConfig::default().with_rank(2).with_ridges(1.0, 1.0);
    let mut model = initialize(&graph, &config).unwrap();
    model.relation_weights[(1, 2)] = 0.3;
    let cores = update_s(&graph, &model, &config).unwrap();

    // rows of the stacked problem: sqrt(w) vec(R_im) and vec(R_bm), unknown vec(S)
    let (gi, gm) = (&model.factors[1], &model.factors[2]);
    let lifted = graph.membership().unwrap().matrix.dense().matmul(gi).unwrap();
    let r_im = graph.relation(1, 2).unwrap().unwrap().matrix.dense().into_owned();
    let r_bm = graph.relation(0, 2).unwrap().unwrap().matrix.dense().into_owned();
    let (k, km) = (gi.cols(), gm.cols());
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let w = 0.3f64.sqrt();
    for (left, data, scale) in [(gi, &r_im, w), (&lifted, &r_bm, 1.0)] {
        for r in 0..data.rows() {
            for c in 0..data.cols() {
                let mut coeffs = vec![0.0; k * km];
                for a in 0..k {
                    for b in 0..km {
                        coeffs[a * km + b] = scale * left[(r, a)] * gm[(c, b)];
                    }
                }
                rows.push(coeffs);
                y.push(scale * data[(r, c)]);
            }
        }
    }
    let x = lstsq(&rows, &y);
    let s = &cores[&(1, 2)];
    for a in 0..k {
        for b in 0..km {
            assert!((s[(a, b)] - x[a * km + b]).abs() < 1e-8, "{s:?} vs {x:?}");
        }
    }
}

#[test]
fn without_dispatch_the_core_is_plain_least_squares() {
    let graph = dispatch_graph(6);
    let config = SolverConfig::default().with_rank(2).with_mode(Mode::NoDispatch).with_ridges(1.0, 1.0);
    let model = initialize(&graph, &config).unwrap();
    let cores = update_s(&graph, &model, &config).unwrap();
    let r_im = graph.relation(1, 2).unwrap().unwrap().matrix.dense().into_owned();
    let plain = solve_sylvester_least_squares(&model.factors[1], &r_im, &model.factors[2]).unwrap();
    assert!(cores[&(1, 2)].sub(&plain).unwrap().max_abs() < 1e-10);
}

#[test]
fn weight_rows_stay_on_the_simplex() {
    for seed in 0..10 {
        let graph = random_graph(seed);
        let config = SolverConfig::default().with_rank(2).with_ridges(0.5, 0.5).with_seed(seed);
        let model = initialize(&graph, &config).unwrap();
        let (wr, wh) = update_weights(&graph, &model, &config).unwrap();
        for (w, declared) in [
            (&wr, (0..wr.rows()).map(|i| (0..wr.cols()).filter(|&j| graph.relation(i, j).unwrap().is_some()).collect::<Vec<_>>()).collect::<Vec<_>>()),
            (&wh, (0..wh.rows()).map(|p| (0..wh.cols()).filter(|&t| graph.view(p, t).unwrap().is_some()).collect::<Vec<_>>()).collect::<Vec<_>>()),
        ] {
            for (row, cols) in declared.iter().enumerate() {
                let sum: f64 = cols.iter().map(|&c| w[(row, c)]).sum();
                assert!(w.row(row).iter().all(|&v| v >= 0.0));
                if !cols.is_empty() {
                    assert!((sum - 1.0).abs() < 1e-12, "seed {seed} row {row}: {sum}");
                }
                for c in 0..w.cols() {
                    if !cols.contains(&c) {
                        assert_eq!(w[(row, c)], 0.0);
                    }
                }
            }
        }
    }
}

#[test]
fn zero_ridge_with_learned_weights_is_rejected() {
    let graph = random_graph(0);
    let config = SolverConfig::default().with_rank(2).with_ridges(0.0, 1.0);
    assert!(matches!(fit(&graph, &config), Err(Error::InvalidConfig(_))));
    // frozen weights do not need a ridge
    assert!(fit(&graph, &config.with_mode(Mode::Dfmf).with_max_iters(3)).is_ok());
}

#[test]
fn planted_exact_model_is_recovered() {
    let mut rng = rng(11);
    let g0 = uniform_matrix(&mut rng, 12, 2, 0.0, 1.0);
    let g1 = uniform_matrix(&mut rng, 9, 2, 0.0, 1.0);
    let r = g0.matmul_t(&g1).unwrap();
    let graph = two_type(r.clone());
    let config = dfmf(2).with_max_iters(200).with_rel_tol(0.0).with_seed(2);
    let start = initialize(&graph, &config).unwrap();
    let initial = frobenius_sq(&r.sub(&start.reconstruct(0, 1).unwrap()).unwrap(), None).unwrap();
    let model = fit(&graph, &config).unwrap();
    let last = frobenius_sq(&r.sub(&model.reconstruct(0, 1).unwrap()).unwrap(), None).unwrap();
    assert!(last / initial < 1e-3, "{initial} -> {last}");
}

#[test]
fn factors_stay_nonnegative_and_history_is_bounded() {
    for seed in 0..10 {
        let graph = random_graph(seed);
        let config = SolverConfig::default().with_rank(3).with_ridges(1.0, 1.0).with_seed(seed).with_max_iters(15);
        let model = fit(&graph, &config).unwrap();
        assert!(model.history.len() <= 15);
        assert!(model.factors.iter().all(|g| g.as_slice().iter().all(|&v| v >= 0.0)));
    }
}

#[test]
fn fits_are_deterministic() {
    let graph = random_graph(42);
    let config = SolverConfig::default().with_rank(3).with_ridges(1.0, 2.0).with_seed(9).with_max_iters(20);
    assert_eq!(fit(&graph, &config).unwrap(), fit(&graph, &config).unwrap());
    let other = fit(&graph, &config.clone().with_seed(10)).unwrap();
    assert_ne!(fit(&graph, &config).unwrap().factors, other.factors);
}

#[test]
fn modes_coincide_without_roles() {
    let graph = random_graph(1);
    assert!(graph.roles().is_none() || graph.num_types() >= 3);
    let graph = two_type(uniform_matrix(&mut rng(4), 6, 5, 0.0, 1.0));
    let base = SolverConfig::default().with_rank(2).with_seed(3).with_max_iters(30).with_ridges(1.0, 1.0);
    let dfmf = fit(&graph, &base.clone().with_mode(Mode::Dfmf)).unwrap();
    let frozen = fit(&graph, &base.clone().with_mode(Mode::NoWeights)).unwrap();
    assert_eq!(dfmf.history, frozen.history);
    let full = fit(&graph, &base.clone().with_mode(Mode::Full)).unwrap();
    let no_dispatch = fit(&graph, &base.with_mode(Mode::NoDispatch)).unwrap();
    assert_eq!(full.history, no_dispatch.history);
}

#[test]
fn dfmf_ignores_stored_weights() {
    let graph = random_graph(7);
    let config = dfmf(2).with_seed(1);
    let mut model = initialize(&graph, &config).unwrap();
    let before = objective(&graph, &model, &config).unwrap();
    model.relation_weights = model.relation_weights.scale(3.0);
    assert_eq!(objective(&graph, &model, &config).unwrap(), before);
}

#[test]
fn objective_of_exact_factorization_is_zero() {
    let mut rng = rng(8);
    let g0 = uniform_matrix(&mut rng, 4, 2, 0.0, 1.0);
    let g1 = uniform_matrix(&mut rng, 3, 2, 0.0, 1.0);
    let s = Matrix::from_rows(&[[0.7, 0.1], [0.2, 0.4]]);
    let graph = FusionGraph::unstructured(
        vec![ObjectType::new("a", 4), ObjectType::new("b", 3)],
        vec![InterRelation::new(0, 1, g0.matmul(&s).unwrap().matmul_t(&g1).unwrap())],
        vec![IntraView::new(0, 0, Matrix::zeros(4, 4))],
    );
    let config = dfmf(2);
    let mut model = initialize(&graph, &config).unwrap();
    model.factors = vec![g0, g1];
    model.cores.insert((0, 1), s);
    let terms = objective_terms(&graph, &model, &config).unwrap();
    assert!(terms.relations.abs() < 1e-24);
    assert_eq!(terms.views, 0.0);
    assert_eq!(terms.ridge, 0.0);
}

#[test]
fn svd_start_beats_random_start() {
    let mut wins = 0;
    for trial in 0..50 {
        let mut rng = rng(100 + trial);
        let h = uniform_matrix(&mut rng, 15, 3, 0.0, 1.0);
        let r = h.matmul_t(&h).unwrap();
        let graph = FusionGraph::unstructured(
            vec![ObjectType::new("a", 15)],
            vec![InterRelation::new(0, 0, r.clone())],
            vec![],
        );
        let residual = |init| {
            let config = dfmf(3).with_seed(trial).with_init(init);
            let model = initialize(&graph, &config).unwrap();
            frobenius_sq(&r.sub(&model.reconstruct(0, 0).unwrap()).unwrap(), None).unwrap()
        };
        if residual(InitScheme::SvdAbs) <= residual(InitScheme::RandomUniform) {
            wins += 1;
        }
    }
    assert!(wins >= 45, "svd start won {wins} of 50");
}

#[test]
fn ranks_are_checked_against_cardinalities() {
    let graph = two_type(Matrix::filled(3, 4, 1.0));
    let mut config = dfmf(2);
    config.ranks = Ranks::PerType(vec![4, 2]);
    assert!(matches!(initialize(&graph, &config), Err(Error::InvalidConfig(_))));
    config.ranks = Ranks::PerType(vec![3, 4]);
    assert_eq!(initialize(&graph, &config).unwrap().ranks(), vec![3, 4]);
    let clipped = initialize(&graph, &dfmf(10)).unwrap();
    assert_eq!(clipped.ranks(), vec![3, 4]);
}

#[test]
fn f32_fits_run() {
    let graph32: FusionGraph<f32> = FusionGraph::unstructured(
        vec![ObjectType::new("a", 5), ObjectType::new("b", 4)],
        vec![InterRelation::new(0, 1, Matrix::from_fn(5, 4, |r, c| ((r * 3 + c) % 5) as f32 / 5.0))],
        vec![],
    );
    let config = SolverConfig::<f32>::default().with_rank(2).with_mode(Mode::Dfmf).with_max_iters(20);
    let model = fit(&graph32, &config).unwrap();
    assert!(model.history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-4)));
}
