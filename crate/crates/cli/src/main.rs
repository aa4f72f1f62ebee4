//! `fusionmf`: fit, predict, cross-validate, sweep and generate synthetic data.
//!
//! Exit codes: 0 success, 2 usage, 3 data, 4 numerical.

mod commands;
mod record;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fusionmf::eval::FoldUnit;
use fusionmf::predict::{BagScoring, KRule};
use fusionmf::solver::{InitScheme, Mode, WeightScope};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(name = "fusionmf", version, about = "Collective tri-factorization for multi-instance multi-label association prediction")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write it to disk.
    Fit(FitArgs),
    /// Score a relation with a saved model.
    Predict(PredictArgs),
    /// Repeated k-fold cross-validation over the target relation.
    Cv(CvArgs),
    /// Cross-validate every cell of a hyperparameter grid.
    Sweep(SweepArgs),
    /// Write a synthetic dataset directory.
    Synth(SynthArgs),
}

#[derive(Args, Clone)]
pub struct SolverArgs {
    /// Latent size shared by every type (clipped to each cardinality).
    #[arg(long, default_value_t = 40)]
    pub rank: usize,
    /// Explicit per-type ranks, comma separated; overrides --rank.
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1e6)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e7)]
    pub beta: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// full, no-weights, no-dispatch or dfmf.
    #[arg(long, default_value = "full")]
    pub mode: Mode,
    /// random-uniform or svd-abs.
    #[arg(long, default_value = "random-uniform")]
    pub init: InitScheme,
    /// per-row or global.
    #[arg(long, default_value = "per-row")]
    pub weight_scope: WeightScope,
    /// Keep going when the objective increases instead of failing.
    #[arg(long)]
    pub allow_increase: bool,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Scoring {
    Auto,
    Direct,
    Aggregated,
}

impl From<Scoring> for BagScoring {
    fn from(s: Scoring) -> Self {
        match s {
            Scoring::Auto => BagScoring::Auto,
            Scoring::Direct => BagScoring::Direct,
            Scoring::Aggregated => BagScoring::Aggregated,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum KRuleArg {
    Ceiling,
    FloorPlusOne,
}

impl From<KRuleArg> for KRule {
    fn from(k: KRuleArg) -> Self {
        match k {
            KRuleArg::Ceiling => KRule::Ceiling,
            KRuleArg::FloorPlusOne => KRule::FloorPlusOne,
        }
    }
}

#[derive(Args, Clone)]
pub struct FoldArgs {
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 10)]
    pub rounds: usize,
    /// entries, rows or positives.
    #[arg(long, default_value = "entries")]
    pub fold_unit: FoldUnit,
    /// Seed of the fold assignment (defaults to --seed).
    #[arg(long)]
    pub fold_seed: Option<u64>,
    /// How bag-level scores are formed.
    #[arg(long, value_enum, default_value = "auto")]
    pub scoring: Scoring,
    #[arg(long, value_enum, default_value = "ceiling")]
    pub k_rule: KRuleArg,
    /// Average F1 over rows instead of label columns.
    #[arg(long)]
    pub example_f1: bool,
}

#[derive(Args)]
pub struct FitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Model file to write.
    #[arg(long, default_value = "model.txt")]
    pub out: PathBuf,
    /// Run record file (default: <out>.run).
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Relation to score as `source:target` type names (default: the target).
    #[arg(long)]
    pub relation: Option<String>,
    #[arg(long, value_enum, default_value = "auto")]
    pub scoring: Scoring,
    /// Also write a 0/1 top-K assignment with this K.
    #[arg(long, conflicts_with = "auto_k")]
    pub top_k: Option<usize>,
    /// Also write a top-K assignment with K chosen from the observed labels.
    #[arg(long)]
    pub auto_k: bool,
    #[arg(long, value_enum, default_value = "ceiling")]
    pub k_rule: KRuleArg,
    /// Score matrix file to write.
    #[arg(long, default_value = "scores.txt")]
    pub out: PathBuf,
    /// Assignment file (default: <out>.topk).
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Args)]
pub struct CvArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub folds: FoldArgs,
    /// Method name written to the report (default: the mode).
    #[arg(long)]
    pub method: Option<String>,
    /// Earlier report to test against, paired by (round, fold); repeatable.
    #[arg(long)]
    pub compare: Vec<PathBuf>,
    #[arg(long, default_value = "report.txt")]
    pub out: PathBuf,
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Alpha,
    Beta,
    D,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub folds: FoldArgs,
    /// Grid of alpha values (default: --alpha).
    #[arg(long, value_delimiter = ',')]
    pub alphas: Vec<f64>,
    /// Grid of beta values (default: --beta).
    #[arg(long, value_delimiter = ',')]
    pub betas: Vec<f64>,
    /// Grid of shared ranks (default: --rank).
    #[arg(long, value_delimiter = ',')]
    pub ranks_grid: Vec<usize>,
    /// One-parameter sweep: which parameter --values sets.
    #[arg(long, value_enum, requires = "values")]
    pub param: Option<SweepParam>,
    #[arg(long, value_delimiter = ',', requires = "param")]
    pub values: Vec<f64>,
    /// Long-format table to write (also printed).
    #[arg(long, default_value = "sweep.tsv")]
    pub out: PathBuf,
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long, default_value = "synthetic")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub bags: usize,
    #[arg(long, default_value_t = 60)]
    pub instances: usize,
    #[arg(long, default_value_t = 10)]
    pub labels: usize,
    /// Sizes of auxiliary types attached to bags.
    #[arg(long, value_delimiter = ',', default_value = "40")]
    pub bag_features: Vec<usize>,
    /// Sizes of auxiliary types attached to instances.
    #[arg(long, value_delimiter = ',', default_value = "40")]
    pub instance_features: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub rank: usize,
    /// Standard deviation of the additive noise.
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    /// Fraction of target entries left observed.
    #[arg(long, default_value_t = 0.8)]
    pub observed_density: f64,
    #[arg(long, default_value_t = 1)]
    pub noise_relations: usize,
    #[arg(long)]
    pub noise_relation_size: Option<usize>,
    /// Fraction of positives per label column; 0 keeps real-valued targets.
    #[arg(long, default_value_t = 0.3)]
    pub label_density: f64,
    /// Plant bag labels directly instead of summing instance labels.
    #[arg(long)]
    pub independent_bags: bool,
    #[arg(long, default_value_t = 1)]
    pub informative_views: usize,
    #[arg(long, default_value_t = 1)]
    pub noise_views: usize,
    #[arg(long, default_value_t = 0.1)]
    pub view_scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub record: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be >= 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Predict(a) => commands::predict(a),
        Command::Cv(a) => commands::cv(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
