//! Planted-structure fusion graphs for desk-scale experiments.
//!
//! Every object type gets a nonnegative latent factor `G*`, every planted
//! relation a nonnegative core `S*`, and relations are emitted as
//! `clip(G*_i S*_ij G*_jᵀ + N(0, σ²), 0)`. Cores are rescaled so each clean
//! relation has unit mean, which makes `σ` a relative noise level.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::{FusionGraph, InterRelation, IntraView, ObjectType, Roles};
use crate::linalg::{Mask, Matrix};

/// Neighbours per object in the similarity graphs behind generated views.
const VIEW_NEIGHBOURS: usize = 5;

/// Parameters of the generator.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub bags: usize,
    pub instances: usize,
    pub labels: usize,
    /// Auxiliary types attached to bags by a planted relation `bag → aux`.
    pub bag_features: Vec<usize>,
    /// Auxiliary types attached to instances by a planted relation `instance → aux`.
    pub instance_features: Vec<usize>,
    /// Rank of the planted factors.
    pub rank: usize,
    /// Standard deviation of the additive Gaussian noise.
    pub noise: f64,
    /// Fraction of target entries left observed; the rest are masked.
    pub observed_density: f64,
    /// Pure-noise relations `bag → noise_k`, entries i.i.d. uniform on `[0, 2)`
    /// (the same mean as a planted relation).
    pub noise_relations: usize,
    /// Cardinality of each noise type; defaults to the first bag feature size
    /// (or the number of labels).
    pub noise_relation_size: Option<usize>,
    /// Binarize the target: this fraction of each label column becomes 1.
    pub label_density: Option<f64>,
    /// Bag labels are the sum of their instances' label scores, and bag
    /// factors the mean of their instances' factors.
    pub labels_from_instances: bool,
    /// Views on the bag type built from k-nearest-neighbour Laplacians of the
    /// planted bag factors (perturbed independently per view).
    pub informative_views: usize,
    /// Views on the bag type built from Laplacians of random graphs.
    pub noise_views: usize,
    /// Multiplier applied to every generated view.
    pub view_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    /// The standard benchmark.
    fn default() -> Self {
        SyntheticSpec {
            bags: 30,
            instances: 60,
            labels: 10,
            bag_features: vec![40],
            instance_features: vec![40],
            rank: 3,
            noise: 0.01,
            observed_density: 0.8,
            noise_relations: 1,
            noise_relation_size: None,
            label_density: Some(0.3),
            labels_from_instances: true,
            informative_views: 1,
            noise_views: 1,
            view_scale: 0.1,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    /// Bags, instances and labels only.
    pub fn three_type(bags: usize, instances: usize, labels: usize, rank: usize) -> Self {
        SyntheticSpec {
            bags,
            instances,
            labels,
            bag_features: vec![],
            instance_features: vec![],
            rank,
            noise_relations: 0,
            informative_views: 0,
            noise_views: 0,
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.bags == 0 || self.instances == 0 || self.labels == 0 {
            return bad("bags, instances and labels must be >= 1".into());
        }
        if self.rank == 0 {
            return bad("rank must be >= 1".into());
        }
        let mut sizes = vec![self.bags, self.instances, self.labels];
        sizes.extend(&self.bag_features);
        sizes.extend(&self.instance_features);
        if self.noise_relations > 0 {
            sizes.push(self.noise_size());
        }
        if let Some(&n) = sizes.iter().find(|&&n| self.rank > n) {
            return bad(format!("rank {} exceeds cardinality {n}", self.rank));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return bad("noise level must be >= 0".into());
        }
        if !(self.observed_density > 0.0 && self.observed_density <= 1.0) {
            return bad("observed density must lie in (0, 1]".into());
        }
        if let Some(q) = self.label_density {
            if !(q > 0.0 && q < 1.0) {
                return bad("label density must lie in (0, 1)".into());
            }
        }
        if !(self.view_scale >= 0.0) || !self.view_scale.is_finite() {
            return bad("view scale must be >= 0".into());
        }
        Ok(())
    }

    fn noise_size(&self) -> usize {
        self.noise_relation_size
            .or_else(|| self.bag_features.first().copied())
            .unwrap_or(self.labels)
    }
}

/// Planted quantities behind a generated graph.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    /// `G*` per type (noise types get an all-zero factor).
    pub factors: Vec<Matrix<f64>>,
    /// `S*` per planted relation.
    pub cores: BTreeMap<(usize, usize), Matrix<f64>>,
    /// Noise-free value of every planted relation.
    pub clean: BTreeMap<(usize, usize), Matrix<f64>>,
    /// Noise-free instance-label scores `G*_i S*_im G*_mᵀ`.
    pub instance_scores: Matrix<f64>,
    /// Binary labels (present when the target was binarized).
    pub labels: Option<Matrix<f64>>,
    /// Keys `(bag, noise type)` of the pure-noise relations.
    pub noise_relations: Vec<(usize, usize)>,
}

impl GroundTruth {
    /// `G*_i S*_ij G*_jᵀ` for a planted relation.
    pub fn reconstruct(&self, i: usize, j: usize) -> Result<Matrix<f64>> {
        let s = self.cores.get(&(i, j)).ok_or(Error::UndeclaredRelation(i, j))?;
        self.factors[i].matmul(s)?.matmul_t(&self.factors[j])
    }
}

fn uniform_factor(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Matrix<f64> {
    Matrix::from_fn(n, k, |_, _| rng.random::<f64>())
}

/// Core with unit-mean reconstruction.
fn planted_core(rng: &mut ChaCha8Rng, gi: &Matrix<f64>, gj: &Matrix<f64>) -> Result<Matrix<f64>> {
    let raw = uniform_factor(rng, gi.cols(), gj.cols());
    let recon = gi.matmul(&raw)?.matmul_t(gj)?;
    let mean = recon.sum() / (recon.rows() * recon.cols()) as f64;
    Ok(if mean > 0.0 { raw.scale(1.0 / mean) } else { raw })
}

fn add_noise(rng: &mut ChaCha8Rng, clean: &Matrix<f64>, sigma: f64) -> Result<Matrix<f64>> {
    if sigma == 0.0 {
        return Ok(clean.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let data = clean
        .as_slice()
        .iter()
        .map(|&v| (v + normal.sample(rng)).max(0.0))
        .collect();
    Matrix::from_vec(clean.rows(), clean.cols(), data)
}

/// Random membership: a shuffled round-robin partition, so every bag gets
/// at least one instance whenever `instances >= bags`.
fn membership(rng: &mut ChaCha8Rng, bags: usize, instances: usize) -> Matrix<f64> {
    let mut order: Vec<usize> = (0..instances).collect();
    order.shuffle(rng);
    let mut m = Matrix::zeros(bags, instances);
    for (slot, &inst) in order.iter().enumerate() {
        m[(slot % bags, inst)] = 1.0;
    }
    m
}

/// Graph Laplacian `D − A` of a symmetric weighted adjacency.
fn laplacian(adj: &Matrix<f64>) -> Matrix<f64> {
    let n = adj.rows();
    let mut l = adj.scale(-1.0);
    for i in 0..n {
        let degree: f64 = adj.row(i).iter().sum();
        l[(i, i)] = degree;
    }
    l
}

fn knn_adjacency(points: &Matrix<f64>, k: usize) -> Matrix<f64> {
    let n = points.rows();
    let norms: Vec<f64> = (0..n)
        .map(|i| points.row(i).iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12))
        .collect();
    let cosine = |a: usize, b: usize| {
        points.row(a).iter().zip(points.row(b)).map(|(x, y)| x * y).sum::<f64>() / (norms[a] * norms[b])
    };
    let mut adj = Matrix::zeros(n, n);
    for i in 0..n {
        let mut others: Vec<(usize, f64)> = (0..n).filter(|&j| j != i).map(|j| (j, cosine(i, j))).collect();
        others.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for &(j, sim) in others.iter().take(k) {
            adj[(i, j)] = sim;
            adj[(j, i)] = sim;
        }
    }
    adj
}

fn random_adjacency(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Matrix<f64> {
    let mut adj = Matrix::zeros(n, n);
    for i in 0..n {
        for _ in 0..k.min(n.saturating_sub(1)) {
            let mut j = rng.random_range(0..n);
            while j == i {
                j = rng.random_range(0..n);
            }
            let w = rng.random_range(0.5..1.0);
            adj[(i, j)] = w;
            adj[(j, i)] = w;
        }
    }
    adj
}

/// Exactly `round(density · cells)` observed entries, chosen uniformly.
fn observed_mask(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> Mask {
    let cells = rows * cols;
    let keep = ((density * cells as f64).round() as usize).min(cells);
    let mut idx: Vec<usize> = (0..cells).collect();
    idx.shuffle(rng);
    let mut mask = Mask::none(rows, cols);
    for &c in &idx[..keep] {
        mask.set(c / cols, c % cols, true);
    }
    mask
}

/// Per-column top fraction of `scores` set to 1 (ties broken by row index).
fn binarize_columns(scores: &Matrix<f64>, density: f64) -> Matrix<f64> {
    let (rows, cols) = scores.shape();
    let positives = ((density * rows as f64).ceil() as usize).clamp(1, rows.saturating_sub(1).max(1));
    let mut out = Matrix::zeros(rows, cols);
    for c in 0..cols {
        let mut order: Vec<usize> = (0..rows).collect();
        order.sort_by(|&a, &b| scores[(b, c)].total_cmp(&scores[(a, c)]).then(a.cmp(&b)));
        for &r in &order[..positives] {
            out[(r, c)] = 1.0;
        }
    }
    out
}

/// Generates a fusion graph with planted structure plus its ground truth.
///
/// Type layout: `0 = bags`, `1 = instances`, `2 = labels`, then bag feature
/// types, instance feature types and noise types in that order.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(FusionGraph<f64>, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.rank;
    let (bag, inst, label) = (0usize, 1usize, 2usize);

    let mut types = vec![
        ObjectType::new("bags", spec.bags),
        ObjectType::new("instances", spec.instances),
        ObjectType::new("labels", spec.labels),
    ];
    let r_bi = membership(&mut rng, spec.bags, spec.instances);
    let g_inst = uniform_factor(&mut rng, spec.instances, k);
    let g_label = uniform_factor(&mut rng, spec.labels, k);
    let g_bag = if spec.labels_from_instances {
        // mean of member instances
        let sums = r_bi.matmul(&g_inst)?;
        Matrix::from_fn(spec.bags, k, |b, c| {
            let count: f64 = r_bi.row(b).iter().sum();
            if count > 0.0 {
                sums[(b, c)] / count
            } else {
                0.0
            }
        })
    } else {
        uniform_factor(&mut rng, spec.bags, k)
    };
    let mut factors = vec![g_bag, g_inst, g_label];
    let mut cores = BTreeMap::new();
    let mut clean = BTreeMap::new();
    let mut relations = vec![InterRelation::new(bag, inst, r_bi.clone())];

    let s_im = planted_core(&mut rng, &factors[inst], &factors[label])?;
    let instance_scores = factors[inst].matmul(&s_im)?.matmul_t(&factors[label])?;
    let clean_bm = if spec.labels_from_instances {
        r_bi.matmul(&instance_scores)?
    } else {
        let s_bm = planted_core(&mut rng, &factors[bag], &factors[label])?;
        let c = factors[bag].matmul(&s_bm)?.matmul_t(&factors[label])?;
        cores.insert((bag, label), s_bm);
        c
    };
    let noisy_bm = add_noise(&mut rng, &clean_bm, spec.noise)?;
    let (target_matrix, labels) = match spec.label_density {
        Some(q) => {
            let l = binarize_columns(&noisy_bm, q);
            (l.clone(), Some(l))
        }
        None => (noisy_bm, None),
    };
    let mut target = InterRelation::new(bag, label, target_matrix);
    if spec.observed_density < 1.0 {
        target = target.with_mask(observed_mask(&mut rng, spec.bags, spec.labels, spec.observed_density));
    }
    clean.insert((bag, label), clean_bm);
    relations.push(target);

    let mut attach = |owner: usize, size: usize, name: String, rng: &mut ChaCha8Rng, factors: &mut Vec<Matrix<f64>>, types: &mut Vec<ObjectType>| -> Result<()> {
        let id = types.len();
        types.push(ObjectType::new(name, size));
        factors.push(uniform_factor(rng, size, k));
        let s = planted_core(rng, &factors[owner], &factors[id])?;
        let c = factors[owner].matmul(&s)?.matmul_t(&factors[id])?;
        let noisy = add_noise(rng, &c, spec.noise)?;
        relations.push(InterRelation::new(owner, id, noisy));
        cores.insert((owner, id), s);
        clean.insert((owner, id), c);
        Ok(())
    };
    for (f, &size) in spec.bag_features.iter().enumerate() {
        attach(bag, size, format!("bag_feature{f}"), &mut rng, &mut factors, &mut types)?;
    }
    for (f, &size) in spec.instance_features.iter().enumerate() {
        attach(inst, size, format!("instance_feature{f}"), &mut rng, &mut factors, &mut types)?;
    }

    let mut noise_keys = Vec::new();
    let noise_size = spec.noise_size();
    for f in 0..spec.noise_relations {
        let id = types.len();
        types.push(ObjectType::new(format!("noise{f}"), noise_size));
        factors.push(Matrix::zeros(noise_size, k));
        let m = Matrix::from_fn(spec.bags, noise_size, |_, _| rng.random_range(0.0..2.0));
        relations.push(InterRelation::new(bag, id, m));
        noise_keys.push((bag, id));
    }

    let mut views = Vec::new();
    for v in 0..spec.informative_views {
        let jitter = Matrix::from_fn(spec.bags, k, |_, _| rng.random_range(0.0..0.05));
        let points = factors[bag].add(&jitter)?;
        let lap = laplacian(&knn_adjacency(&points, VIEW_NEIGHBOURS.min(spec.bags.saturating_sub(1))));
        views.push(IntraView::new(bag, v, lap.scale(spec.view_scale)));
    }
    for v in 0..spec.noise_views {
        let lap = laplacian(&random_adjacency(&mut rng, spec.bags, VIEW_NEIGHBOURS));
        views.push(IntraView::new(bag, spec.informative_views + v, lap.scale(spec.view_scale)));
    }

    let graph = FusionGraph::try_new(types, relations, views, Roles::bag_target(bag, inst, label))?;
    let mut cores_all = cores;
    cores_all.insert((inst, label), s_im);
    Ok((
        graph,
        GroundTruth {
            factors,
            cores: cores_all,
            clean,
            instance_scores,
            labels,
            noise_relations: noise_keys,
        },
    ))
}
