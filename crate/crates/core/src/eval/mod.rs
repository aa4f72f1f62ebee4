//! Ranking metrics, masked cross-validation and paired significance tests.

mod cv;
mod metrics;
mod stats;

pub use cv::{
    cross_validate, direction_name, evaluate_fold, evaluate_holdout, Comparison, CvOptions, EvalReport, FoldPlan, FoldRecord, FoldUnit,
    Metric,
};
pub use metrics::{auprc, auroc, avg_f1, per_label_average, positive_mask, F1Averaging, LabelAverage, RankMetric};
pub use stats::{mean_std, paired_t_test, TTest, SIGNIFICANCE_LEVEL};
