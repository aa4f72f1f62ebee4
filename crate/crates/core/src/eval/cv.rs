use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::metrics::{avg_f1, per_label_average, positive_mask, F1Averaging, RankMetric};
use crate::eval::stats::{mean_std, paired_t_test, TTest};
use crate::graph::FusionGraph;
use crate::linalg::{Mask, Matrix};
use crate::predict::{bag_scores, choose_k, top_k, BagScoring, KRule};
use crate::solver::{fit, SolverConfig};

/// What the folds partition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FoldUnit {
    /// Observed entries of the target relation. Positives and negatives are
    /// dealt out separately so every fold receives its share of both.
    #[default]
    Entries,
    /// Whole rows of the target relation.
    Rows,
    /// Observed positive entries only. Each fold hides its positives and
    /// scores them against every observed negative, which stays in training.
    Positives,
}

impl FoldUnit {
    pub fn name(self) -> &'static str {
        match self {
            FoldUnit::Entries => "entries",
            FoldUnit::Rows => "rows",
            FoldUnit::Positives => "positives",
        }
    }
}

impl std::str::FromStr for FoldUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entries" => Ok(FoldUnit::Entries),
            "rows" => Ok(FoldUnit::Rows),
            "positives" => Ok(FoldUnit::Positives),
            other => Err(Error::InvalidConfig(format!(
                "unknown fold unit '{other}' (expected entries, rows or positives)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    pub num_folds: usize,
    pub num_rounds: usize,
    pub seed: u64,
    pub unit: FoldUnit,
}

impl Default for FoldPlan {
    fn default() -> Self {
        FoldPlan {
            num_folds: 5,
            num_rounds: 10,
            seed: 0,
            unit: FoldUnit::Entries,
        }
    }
}

impl FoldPlan {
    /// Held-out masks of every fold of `round`. The masks are disjoint and
    /// together cover every unit.
    pub fn folds(&self, target: &Matrix<f64>, observed: Option<&Mask>, round: usize) -> Result<Vec<Mask>> {
        if self.num_folds < 2 {
            return Err(Error::InvalidConfig("cross-validation needs at least 2 folds".into()));
        }
        let (rows, cols) = target.shape();
        let seen = |r: usize, c: usize| observed.is_none_or(|m| m.get(r, c));
        let mut rng = ChaCha8Rng::seed_from_u64(round_seed(self.seed, round));
        let mut folds = vec![Mask::none(rows, cols); self.num_folds];
        match self.unit {
            FoldUnit::Entries | FoldUnit::Positives => {
                let (mut pos, mut neg) = (Vec::new(), Vec::new());
                for r in 0..rows {
                    for c in 0..cols {
                        if seen(r, c) {
                            if target[(r, c)] > 0.0 { &mut pos } else { &mut neg }.push((r, c));
                        }
                    }
                }
                if self.unit == FoldUnit::Positives {
                    neg.clear();
                }
                pos.shuffle(&mut rng);
                neg.shuffle(&mut rng);
                for (n, (r, c)) in pos.into_iter().chain(neg).enumerate() {
                    folds[n % self.num_folds].set(r, c, true);
                }
            }
            FoldUnit::Rows => {
                let mut units: Vec<usize> = (0..rows).filter(|&r| (0..cols).any(|c| seen(r, c))).collect();
                units.shuffle(&mut rng);
                for (n, r) in units.into_iter().enumerate() {
                    for c in (0..cols).filter(|&c| seen(r, c)) {
                        folds[n % self.num_folds].set(r, c, true);
                    }
                }
            }
        }
        Ok(folds)
    }
}

fn round_seed(seed: u64, round: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(round as u64)
}

/// Scoring options of a cross-validation run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CvOptions {
    /// How bag-level scores are formed when the target is the bag-label relation.
    pub scoring: BagScoring,
    pub k_rule: KRule,
    pub f1: F1Averaging,
}

/// Metrics of one held-out fold.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldRecord {
    pub round: usize,
    pub fold: usize,
    pub avg_f1: f64,
    pub auroc: f64,
    pub auprc: f64,
    pub k: usize,
    /// Label columns without both classes among the held-out entries.
    pub skipped_labels: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Metric {
    AvgF1,
    Auroc,
    Auprc,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::AvgF1, Metric::Auroc, Metric::Auprc];

    pub fn name(self) -> &'static str {
        match self {
            Metric::AvgF1 => "avg_f1",
            Metric::Auroc => "auroc",
            Metric::Auprc => "auprc",
        }
    }

    pub fn of(self, record: &FoldRecord) -> f64 {
        match self {
            Metric::AvgF1 => record.avg_f1,
            Metric::Auroc => record.auroc,
            Metric::Auprc => record.auprc,
        }
    }
}

/// Paired comparison of this report's folds against another method's.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub other: String,
    pub other_folds: Vec<FoldRecord>,
    /// One test per entry of [`Metric::ALL`].
    pub tests: Vec<(Metric, TTest)>,
}

impl Comparison {
    pub fn test(&self, metric: Metric) -> Option<&TTest> {
        self.tests.iter().find(|(m, _)| *m == metric).map(|(_, t)| t)
    }
}

/// Fold-level metrics of one method, ordered by `(round, fold)`.
///
/// Headline numbers are the mean and sample standard deviation over all
/// fold × round samples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub folds: Vec<FoldRecord>,
    pub comparisons: Vec<Comparison>,
}

impl EvalReport {
    pub fn samples(&self, metric: Metric) -> Vec<f64> {
        self.folds.iter().map(|f| metric.of(f)).collect()
    }

    pub fn mean_std(&self, metric: Metric) -> (f64, f64) {
        mean_std(&self.samples(metric))
    }

    /// Per-round means of `metric`, in round order.
    pub fn round_means(&self, metric: Metric) -> Vec<f64> {
        let mut out: Vec<(usize, f64, usize)> = Vec::new();
        for f in &self.folds {
            match out.iter_mut().find(|(r, _, _)| *r == f.round) {
                Some(entry) => {
                    entry.1 += metric.of(f);
                    entry.2 += 1;
                }
                None => out.push((f.round, metric.of(f), 1)),
            }
        }
        out.sort_by_key(|e| e.0);
        out.into_iter().map(|(_, s, n)| s / n as f64).collect()
    }

    /// Appends paired t-tests against `other`, matched on `(round, fold)`.
    pub fn compare_with(&mut self, other: &EvalReport) -> Result<()> {
        let key = |f: &FoldRecord| (f.round, f.fold);
        let mut mine: Vec<&FoldRecord> = self.folds.iter().collect();
        let mut theirs: Vec<&FoldRecord> = other.folds.iter().collect();
        mine.sort_by_key(|f| key(f));
        theirs.sort_by_key(|f| key(f));
        if mine.iter().map(|f| key(f)).ne(theirs.iter().map(|f| key(f))) {
            return Err(Error::Eval(format!(
                "cannot pair folds of '{}' with folds of '{}'",
                self.method, other.method
            )));
        }
        let tests = Metric::ALL
            .iter()
            .map(|&m| {
                let a: Vec<f64> = mine.iter().map(|f| m.of(f)).collect();
                let b: Vec<f64> = theirs.iter().map(|f| m.of(f)).collect();
                paired_t_test(&a, &b).map(|t| (m, t))
            })
            .collect::<Result<Vec<_>>>()?;
        self.comparisons.push(Comparison {
            other: other.method.clone(),
            other_folds: other.folds.clone(),
            tests,
        });
        Ok(())
    }
}

/// Human-readable direction of a comparison.
pub fn direction_name(direction: Ordering) -> &'static str {
    match direction {
        Ordering::Greater => "better",
        Ordering::Less => "worse",
        Ordering::Equal => "tie",
    }
}

/// Scores of the target relation from a fitted model.
fn target_scores(
    graph: &FusionGraph<f64>,
    model: &crate::solver::FactorModel<f64>,
    options: &CvOptions,
) -> Result<Matrix<f64>> {
    let roles = graph.require_roles()?;
    if roles.target == (roles.bag, roles.label) {
        Ok(bag_scores(model, graph, options.scoring)?.scores)
    } else {
        let (i, j) = roles.target;
        model.reconstruct(i, j)
    }
}

/// Evaluates one held-out mask: fit on the rest, score the hidden entries.
pub fn evaluate_holdout(
    graph: &FusionGraph<f64>,
    config: &SolverConfig<f64>,
    held_out: &Mask,
    options: &CvOptions,
) -> Result<FoldRecord> {
    evaluate_fold(graph, config, held_out, held_out, options)
}

/// Fits with `held_out` hidden and computes the metrics over `scored`
/// (a superset of `held_out`; extra entries stay in training).
pub fn evaluate_fold(
    graph: &FusionGraph<f64>,
    config: &SolverConfig<f64>,
    held_out: &Mask,
    scored: &Mask,
    options: &CvOptions,
) -> Result<FoldRecord> {
    let target = graph.target()?;
    let (i, j) = graph.require_roles()?.target;
    let truth = target.matrix.dense().into_owned();
    let labels = positive_mask(&truth);
    let observed = target.observed.clone().unwrap_or_else(|| Mask::all(truth.rows(), truth.cols()));
    let training = Mask::from_fn(truth.rows(), truth.cols(), |r, c| observed.get(r, c) && !held_out.get(r, c));
    if !held_out.as_slice().iter().zip(labels.as_slice()).any(|(&h, &l)| h && l) {
        return Err(Error::Eval("fold holds out no positive entries".into()));
    }
    let masked = graph.with_relation_mask(i, j, Some(training.clone()))?;
    let model = fit(&masked, config)?;
    let mut scores = target_scores(&masked, &model, options)?;

    let k = choose_k(
        &Mask::from_fn(truth.rows(), truth.cols(), |r, c| training.get(r, c) && labels.get(r, c)),
        Some(&training),
        options.k_rule,
    )?;
    let auroc = per_label_average(&scores, &labels, Some(scored), RankMetric::Auroc)?;
    let auprc = per_label_average(&scores, &labels, Some(scored), RankMetric::Auprc)?;
    // known training entries are not candidates for the top-K slots
    for r in 0..scores.rows() {
        for c in 0..scores.cols() {
            if training.get(r, c) && !scored.get(r, c) {
                scores[(r, c)] = f64::NAN;
            }
        }
    }
    let binarized = top_k(&scores, k);
    let avg_f1 = avg_f1(&binarized, &labels, Some(scored), options.f1)?;
    Ok(FoldRecord {
        round: 0,
        fold: 0,
        avg_f1,
        auroc: auroc.value,
        auprc: auprc.value,
        k,
        skipped_labels: auroc.skipped,
    })
}

/// Repeated k-fold cross-validation over the target relation.
///
/// Every `(round, fold)` job fits its own masked copy of the graph; jobs run
/// in parallel and the records come back ordered by `(round, fold)`. The
/// solver seed of round `r` is `config.seed + r`.
pub fn cross_validate(
    graph: &FusionGraph<f64>,
    config: &SolverConfig<f64>,
    plan: &FoldPlan,
    options: &CvOptions,
    method: impl Into<String>,
) -> Result<EvalReport> {
    if plan.num_rounds == 0 {
        return Err(Error::InvalidConfig("cross-validation needs at least 1 round".into()));
    }
    let target = graph.target()?;
    let truth = target.matrix.dense().into_owned();
    let negatives = Mask::from_fn(truth.rows(), truth.cols(), |r, c| target.is_observed(r, c) && truth[(r, c)] <= 0.0);
    let mut jobs = Vec::new();
    for round in 0..plan.num_rounds {
        for (fold, mask) in plan.folds(&truth, target.observed.as_ref(), round)?.into_iter().enumerate() {
            jobs.push((round, fold, mask));
        }
    }
    let folds = jobs
        .par_iter()
        .map(|(round, fold, mask)| {
            let cfg = config.clone().with_seed(config.seed.wrapping_add(*round as u64));
            let scored = match plan.unit {
                FoldUnit::Positives => {
                    Mask::from_fn(truth.rows(), truth.cols(), |r, c| mask.get(r, c) || negatives.get(r, c))
                }
                _ => mask.clone(),
            };
            evaluate_fold(graph, &cfg, mask, &scored, options)
                .map(|rec| FoldRecord {
                    round: *round,
                    fold: *fold,
                    ..rec
                })
                .map_err(|e| match e {
                    Error::Eval(msg) => Error::Eval(format!("round {round}, fold {fold}: {msg}")),
                    other => other,
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        method: method.into(),
        folds,
        comparisons: Vec::new(),
    })
}
