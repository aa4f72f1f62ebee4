#![allow(dead_code)]

use fusionmf::graph::{FusionGraph, InterRelation, IntraView, ObjectType, Roles};
use fusionmf::linalg::{Mask, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

/// Signed-graph Laplacian `diag(Σ|A|) − A` of a random symmetric signed
/// adjacency: both signs off the diagonal, positive semidefinite.
pub fn signed_view(rng: &mut ChaCha8Rng, n: usize) -> Matrix<f64> {
    let mut m = Matrix::zeros(n, n);
    for r in 0..n {
        for c in r + 1..n {
            let v: f64 = rng.random_range(-1.0..1.0);
            m[(r, c)] = -v;
            m[(c, r)] = -v;
            m[(r, r)] += v.abs();
            m[(c, c)] += v.abs();
        }
    }
    m
}

pub fn random_mask(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> Mask {
    let mut mask = Mask::from_fn(rows, cols, |_, _| rng.random_bool(density));
    mask.set(0, 0, true);
    mask
}

/// A small random graph with 2 to 4 types and at most 20 objects per type.
///
/// Graphs with at least three types get bag/instance/label roles (types 0, 1,
/// 2) with a 0/1 membership and a partly masked target; two-type graphs are
/// unstructured. Extra relations and signed views are added at random.
pub fn random_graph(seed: u64) -> FusionGraph<f64> {
    let mut rng = rng(seed);
    let m = rng.random_range(2..=4usize);
    let sizes: Vec<usize> = (0..m).map(|_| rng.random_range(3..=20)).collect();
    let types: Vec<ObjectType> = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| ObjectType::new(format!("t{i}"), n))
        .collect();
    let mut relations = Vec::new();
    let mut declared = std::collections::HashSet::new();
    if m >= 3 {
        let (b, i) = (sizes[0], sizes[1]);
        let membership = Matrix::from_fn(b, i, |r, c| if c % b == r { 1.0 } else { 0.0 });
        relations.push(InterRelation::new(0, 1, membership));
        let target = uniform_matrix(&mut rng, sizes[0], sizes[2], 0.0, 1.0).map(|v| if v > 0.6 { 1.0 } else { 0.0 });
        let mask = random_mask(&mut rng, sizes[0], sizes[2], 0.8);
        relations.push(InterRelation::new(0, 2, target).with_mask(mask));
        declared.insert((0, 1));
        declared.insert((0, 2));
    } else {
        relations.push(InterRelation::new(0, 1, uniform_matrix(&mut rng, sizes[0], sizes[1], 0.0, 2.0)));
        declared.insert((0, 1));
    }
    for s in 0..m {
        for t in 0..m {
            if declared.contains(&(s, t)) || !rng.random_bool(0.35) {
                continue;
            }
            let mut rel = InterRelation::new(s, t, uniform_matrix(&mut rng, sizes[s], sizes[t], 0.0, 2.0));
            if rng.random_bool(0.3) {
                rel = rel.with_mask(random_mask(&mut rng, sizes[s], sizes[t], 0.7));
            }
            relations.push(rel);
            declared.insert((s, t));
        }
    }
    let mut views = Vec::new();
    for p in 0..m {
        for t in 0..2 {
            if rng.random_bool(0.3) {
                views.push(IntraView::new(p, t, signed_view(&mut rng, sizes[p]).scale(0.1)));
            }
        }
    }
    let graph = if m >= 3 {
        FusionGraph::new(types, relations, views, Roles::bag_target(0, 1, 2))
    } else {
        FusionGraph::unstructured(types, relations, views)
    };
    graph.ensure_valid().expect("generated graph is valid");
    graph
}
