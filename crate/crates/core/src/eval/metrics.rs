use crate::error::{Error, Result};
use crate::linalg::{Mask, Matrix};
use crate::scalar::Scalar;

fn check_lengths(op: &'static str, a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            op,
            left: (a, 1),
            right: (b, 1),
        })
    }
}

fn to_f64<T: Scalar>(scores: &[T]) -> Result<Vec<f64>> {
    scores
        .iter()
        .map(|s| {
            let v = s.as_f64();
            if v.is_nan() {
                Err(Error::NonFinite("score vector contains NaN".into()))
            } else {
                Ok(v)
            }
        })
        .collect()
}

/// Area under the ROC curve as the fraction of correctly ordered
/// positive-negative pairs, ties counting one half.
///
/// Fails on an all-positive or all-negative label vector.
pub fn auroc<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<f64> {
    check_lengths("auroc", scores.len(), labels.len())?;
    let scores = to_f64(scores)?;
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Eval("auroc needs at least one positive and one negative".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Mann-Whitney U with midranks for tied groups
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let midrank = (start + end + 1) as f64 / 2.0;
        let tied_positives = order[start..end].iter().filter(|&&i| labels[i]).count();
        rank_sum += midrank * tied_positives as f64;
        start = end;
    }
    let p = positives as f64;
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

/// Average precision: mean over positives of the precision at their rank.
/// Items are ranked by descending score, ties by ascending index.
///
/// Fails when there is no positive label.
pub fn auprc<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<f64> {
    check_lengths("auprc", scores.len(), labels.len())?;
    let scores = to_f64(scores)?;
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::Eval("auprc needs at least one positive".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut total = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            total += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(total / positives as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RankMetric {
    #[default]
    Auroc,
    Auprc,
}

impl RankMetric {
    pub fn compute<T: Scalar>(self, scores: &[T], labels: &[bool]) -> Result<f64> {
        match self {
            RankMetric::Auroc => auroc(scores, labels),
            RankMetric::Auprc => auprc(scores, labels),
        }
    }

    fn defined(self, positives: usize, negatives: usize) -> bool {
        match self {
            RankMetric::Auroc => positives > 0 && negatives > 0,
            RankMetric::Auprc => positives > 0,
        }
    }
}

/// Average over label columns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabelAverage {
    pub value: f64,
    pub used: usize,
    /// Columns where the metric is undefined; they are left out of the mean.
    pub skipped: usize,
}

fn check_shapes(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { op, left: a, right: b })
    }
}

/// Applies `metric` to every label column, restricted to the rows where the
/// column is observed, and averages over the columns where it is defined.
pub fn per_label_average<T: Scalar>(
    scores: &Matrix<T>,
    labels: &Mask,
    observed: Option<&Mask>,
    metric: RankMetric,
) -> Result<LabelAverage> {
    check_shapes("per_label_average", scores.shape(), labels.shape())?;
    if let Some(m) = observed {
        check_shapes("per_label_average", scores.shape(), m.shape())?;
    }
    let mut sum = 0.0;
    let mut used = 0;
    let mut skipped = 0;
    let mut col_scores = Vec::with_capacity(scores.rows());
    let mut col_labels = Vec::with_capacity(scores.rows());
    for c in 0..scores.cols() {
        col_scores.clear();
        col_labels.clear();
        for r in 0..scores.rows() {
            if observed.is_none_or(|m| m.get(r, c)) {
                col_scores.push(scores[(r, c)]);
                col_labels.push(labels.get(r, c));
            }
        }
        let positives = col_labels.iter().filter(|&&l| l).count();
        if !metric.defined(positives, col_labels.len() - positives) {
            skipped += 1;
            continue;
        }
        sum += metric.compute(&col_scores, &col_labels)?;
        used += 1;
    }
    if used == 0 {
        return Err(Error::Eval(format!("every label column is degenerate for {metric:?}")));
    }
    Ok(LabelAverage {
        value: sum / used as f64,
        used,
        skipped,
    })
}

/// Axis over which F1 is averaged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum F1Averaging {
    /// Mean over label columns.
    #[default]
    Macro,
    /// Mean over rows.
    Example,
}

/// Averaged `2TP / (2TP + FP + FN)` over label columns (or rows), counting
/// only `observed` entries. Groups without any activity score 0 and are kept
/// in the mean.
pub fn avg_f1(binarized: &Mask, labels: &Mask, observed: Option<&Mask>, averaging: F1Averaging) -> Result<f64> {
    check_shapes("avg_f1", binarized.shape(), labels.shape())?;
    if let Some(m) = observed {
        check_shapes("avg_f1", labels.shape(), m.shape())?;
    }
    let (rows, cols) = labels.shape();
    let groups = match averaging {
        F1Averaging::Macro => cols,
        F1Averaging::Example => rows,
    };
    if groups == 0 {
        return Err(Error::Eval("avg_f1 of an empty matrix".into()));
    }
    let mut counts = vec![(0usize, 0usize, 0usize); groups];
    for r in 0..rows {
        for c in 0..cols {
            if !observed.is_none_or(|m| m.get(r, c)) {
                continue;
            }
            let g = match averaging {
                F1Averaging::Macro => c,
                F1Averaging::Example => r,
            };
            match (binarized.get(r, c), labels.get(r, c)) {
                (true, true) => counts[g].0 += 1,
                (true, false) => counts[g].1 += 1,
                (false, true) => counts[g].2 += 1,
                (false, false) => {}
            }
        }
    }
    let total: f64 = counts
        .iter()
        .map(|&(tp, fp, fn_)| {
            let denom = 2 * tp + fp + fn_;
            if denom == 0 {
                0.0
            } else {
                (2 * tp) as f64 / denom as f64
            }
        })
        .sum();
    Ok(total / groups as f64)
}

/// Entries of `values` that are strictly positive.
pub fn positive_mask<T: Scalar>(values: &Matrix<T>) -> Mask {
    Mask::from_fn(values.rows(), values.cols(), |r, c| values[(r, c)] > T::zero())
}
