use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fusionmf::eval::{cross_validate, positive_mask, CvOptions, EvalReport, F1Averaging, FoldPlan, Metric};
use fusionmf::graph::FusionGraph;
use fusionmf::io::{
    describe_comparison, format_mask, format_mean_std, load_graph, load_model, load_report, save_model, save_report,
    write_matrix, write_synthetic, MatrixFormat, SyntheticSpec, SYNTH_MANIFEST,
};
use fusionmf::linalg::Block;
use fusionmf::predict::{bag_scores, choose_k, reconstruct, top_k};
use fusionmf::solver::{fit_with_summary, Ranks, SolverConfig};
use fusionmf::Error;
use rayon::prelude::*;

use crate::record::RunRecord;
use crate::{
    CvArgs, FitArgs, FoldArgs, PredictArgs, SolverArgs, SweepArgs, SweepParam, SynthArgs, EXIT_DATA, EXIT_NUMERICAL,
    EXIT_USAGE,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(Error::InvalidConfig(_)) => EXIT_USAGE,
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_DATA,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn solver_config(args: &SolverArgs) -> SolverConfig<f64> {
    let mut config = SolverConfig::default()
        .with_rank(args.rank)
        .with_ridges(args.alpha, args.beta)
        .with_max_iters(args.max_iters)
        .with_rel_tol(args.rel_tol)
        .with_seed(args.seed)
        .with_mode(args.mode)
        .with_init(args.init);
    if let Some(ks) = &args.ranks {
        config.ranks = Ranks::PerType(ks.clone());
    }
    config.weight_scope = args.weight_scope;
    config.abort_on_divergence = !args.allow_increase;
    config
}

fn cv_setup(args: &FoldArgs, seed: u64) -> (FoldPlan, CvOptions) {
    let plan = FoldPlan {
        num_folds: args.folds,
        num_rounds: args.rounds,
        seed: args.fold_seed.unwrap_or(seed),
        unit: args.fold_unit,
    };
    let options = CvOptions {
        scoring: args.scoring.into(),
        k_rule: args.k_rule.into(),
        f1: if args.example_f1 {
            F1Averaging::Example
        } else {
            F1Averaging::Macro
        },
    };
    (plan, options)
}

fn record_fold_args(record: &mut RunRecord, plan: &FoldPlan, args: &FoldArgs) {
    record.set("folds", plan.num_folds);
    record.set("rounds", plan.num_rounds);
    record.set("fold_unit", plan.unit.name());
    record.set("fold_seed", plan.seed);
    record.set(
        "k_rule",
        match args.k_rule {
            crate::KRuleArg::Ceiling => "ceiling",
            crate::KRuleArg::FloorPlusOne => "floor-plus-one",
        },
    );
    record.set("f1", if args.example_f1 { "example" } else { "macro" });
}

fn load(manifest: &Path, record: &mut RunRecord) -> Result<FusionGraph<f64>> {
    if !manifest.is_file() {
        return Err(CliError::Usage(format!("manifest {} does not exist", manifest.display())));
    }
    record.set("manifest", manifest.display());
    Ok(record.time("load", || load_graph(manifest))?)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn finish(mut record: RunRecord, path: Option<PathBuf>, default: PathBuf) -> Result<()> {
    let path = path.unwrap_or(default);
    record.save(&path).map_err(|source| CliError::Write { path, source })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn fit(args: FitArgs) -> Result<()> {
    let mut record = RunRecord::new("fit");
    let graph = load(&args.manifest, &mut record)?;
    let config = solver_config(&args.solver);
    record.solver(&config);
    let (model, summary) = record.time("fit", || fit_with_summary(&graph, &config))?;
    record.time("save", || save_model(&model, &args.out))?;
    record.output(&args.out);
    record.history(&model.history);
    record.set("sweeps", summary.sweeps);
    record.set("converged", summary.converged);
    let last = model.history.last().copied().unwrap_or(summary.initial_objective);
    println!(
        "{} sweeps, objective {:e} -> {last:e}{}; model written to {}",
        summary.sweeps,
        summary.initial_objective,
        if summary.converged { " (converged)" } else { "" },
        args.out.display()
    );
    finish(record, args.record, with_suffix(&args.out, ".run"))
}

fn relation_ids(graph: &FusionGraph<f64>, spec: &str) -> Result<(usize, usize)> {
    let (a, b) = spec
        .split_once(':')
        .ok_or_else(|| CliError::Usage(format!("relation '{spec}' must be written source:target")))?;
    let id = |name: &str| {
        graph
            .type_id(name)
            .or_else(|| name.parse().ok().filter(|&i: &usize| i < graph.num_types()))
            .ok_or_else(|| CliError::Usage(format!("unknown type '{name}'")))
    };
    Ok((id(a)?, id(b)?))
}

pub fn predict(args: PredictArgs) -> Result<()> {
    let mut record = RunRecord::new("predict");
    let graph = load(&args.manifest, &mut record)?;
    record.set("model", args.model.display());
    let model = record.time("load_model", || load_model::<f64>(&args.model))?;
    if model.num_types() != graph.num_types() {
        return Err(Error::Format(format!(
            "model has {} types but the graph declares {}",
            model.num_types(),
            graph.num_types()
        ))
        .into());
    }
    let relation = match &args.relation {
        Some(spec) => relation_ids(&graph, spec)?,
        None => graph.require_roles()?.target,
    };
    record.set("relation", format!("{}:{}", relation.0, relation.1));
    let scores = match graph.roles() {
        Some(r) if (r.bag, r.label) == relation => {
            record.set("scoring", format!("{:?}", fusionmf::predict::BagScoring::from(args.scoring)).to_lowercase());
            bag_scores(&model, &graph, args.scoring.into())?
        }
        _ => reconstruct(&model, relation.0, relation.1)?,
    };
    write_matrix(&args.out, &Block::Dense(scores.scores.clone()), MatrixFormat::Dense)?;
    record.output(&args.out);

    let k = match (args.top_k, args.auto_k) {
        (Some(k), _) => Some(k),
        (None, true) => {
            let rel = graph
                .relation(relation.0, relation.1)?
                .ok_or(Error::UndeclaredRelation(relation.0, relation.1))?;
            let labels = positive_mask(&rel.matrix.dense());
            Some(choose_k(&labels, rel.observed.as_ref(), args.k_rule.into())?)
        }
        (None, false) => None,
    };
    if let Some(k) = k {
        let path = args.labels_out.clone().unwrap_or_else(|| with_suffix(&args.out, ".topk"));
        write(&path, &format_mask(&top_k(&scores.scores, k)))?;
        record.set("k", k);
        record.output(&path);
        println!("scores written to {}, top-{k} assignment to {}", args.out.display(), path.display());
    } else {
        println!("scores written to {}", args.out.display());
    }
    finish(record, args.record, with_suffix(&args.out, ".run"))
}

fn summary_lines(report: &EvalReport) -> String {
    let mut out = String::new();
    for m in Metric::ALL {
        let (mean, std) = report.mean_std(m);
        let _ = writeln!(out, "{} {}", m.name(), format_mean_std(mean, std));
    }
    for c in &report.comparisons {
        for m in Metric::ALL {
            if let Some(line) = describe_comparison(c, m) {
                let _ = writeln!(out, "{line}");
            }
        }
    }
    out
}

pub fn cv(args: CvArgs) -> Result<()> {
    let mut record = RunRecord::new("cv");
    let graph = load(&args.manifest, &mut record)?;
    let config = solver_config(&args.solver);
    record.solver(&config);
    let (plan, options) = cv_setup(&args.folds, config.seed);
    record_fold_args(&mut record, &plan, &args.folds);
    let others = args
        .compare
        .iter()
        .map(|p| {
            record.set("compare", p.display());
            load_report(p)
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let method = args.method.clone().unwrap_or_else(|| config.mode.name().to_string());
    let mut report = record.time("cv", || cross_validate(&graph, &config, &plan, &options, method))?;
    for other in &others {
        report.compare_with(other)?;
    }
    save_report(&report, &args.out)?;
    record.output(&args.out);
    print!("{}", summary_lines(&report));
    println!("{} fold records written to {}", report.folds.len(), args.out.display());
    finish(record, args.record, with_suffix(&args.out, ".run"))
}

struct Cell {
    alpha: f64,
    beta: f64,
    d: usize,
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let mut record = RunRecord::new("sweep");
    let mut alphas = if args.alphas.is_empty() { vec![args.solver.alpha] } else { args.alphas.clone() };
    let mut betas = if args.betas.is_empty() { vec![args.solver.beta] } else { args.betas.clone() };
    let mut ranks = if args.ranks_grid.is_empty() { vec![args.solver.rank] } else { args.ranks_grid.clone() };
    if let Some(param) = args.param {
        let explicit = match param {
            SweepParam::Alpha => !args.alphas.is_empty(),
            SweepParam::Beta => !args.betas.is_empty(),
            SweepParam::D => !args.ranks_grid.is_empty(),
        };
        if explicit {
            return Err(CliError::Usage("--param/--values conflicts with the matching grid flag".into()));
        }
        match param {
            SweepParam::Alpha => alphas = args.values.clone(),
            SweepParam::Beta => betas = args.values.clone(),
            SweepParam::D => {
                ranks = args
                    .values
                    .iter()
                    .map(|&v| {
                        if v >= 1.0 && v.fract() == 0.0 {
                            Ok(v as usize)
                        } else {
                            Err(CliError::Usage(format!("rank value {v} is not a positive integer")))
                        }
                    })
                    .collect::<Result<_>>()?
            }
        }
    }
    if alphas.is_empty() || betas.is_empty() || ranks.is_empty() {
        return Err(CliError::Usage("sweep grid is empty".into()));
    }
    if args.solver.ranks.is_some() {
        return Err(CliError::Usage("--ranks cannot be combined with a sweep; use --ranks-grid".into()));
    }
    let graph = load(&args.manifest, &mut record)?;
    let base = solver_config(&args.solver);
    record.solver(&base);
    let (plan, options) = cv_setup(&args.folds, base.seed);
    record_fold_args(&mut record, &plan, &args.folds);
    let join = |v: &[String]| v.join(",");
    record.set("grid_alpha", join(&alphas.iter().map(|a| format!("{a:e}")).collect::<Vec<_>>()));
    record.set("grid_beta", join(&betas.iter().map(|b| format!("{b:e}")).collect::<Vec<_>>()));
    record.set("grid_d", join(&ranks.iter().map(|d| d.to_string()).collect::<Vec<_>>()));

    let mut cells = Vec::new();
    for &d in &ranks {
        for &alpha in &alphas {
            for &beta in &betas {
                cells.push(Cell { alpha, beta, d });
            }
        }
    }
    let results: Vec<std::result::Result<EvalReport, Error>> = record.time("sweep", || {
        cells
            .par_iter()
            .map(|cell| {
                let config = base.clone().with_rank(cell.d).with_ridges(cell.alpha, cell.beta);
                cross_validate(&graph, &config, &plan, &options, base.mode.name())
            })
            .collect()
    });

    let mut table = String::from("alpha\tbeta\td\tauroc_mean\tauroc_std\tauprc_mean\tauprc_std\tavg_f1_mean\tavg_f1_std\tstatus\n");
    let mut best: Option<(usize, f64)> = None;
    for (n, (cell, result)) in cells.iter().zip(&results).enumerate() {
        let _ = write!(table, "{:e}\t{:e}\t{}", cell.alpha, cell.beta, cell.d);
        match result {
            Ok(report) => {
                for m in [Metric::Auroc, Metric::Auprc, Metric::AvgF1] {
                    let (mean, std) = report.mean_std(m);
                    let _ = write!(table, "\t{mean:.6}\t{std:.6}");
                }
                table.push_str("\tok\n");
                let auroc = report.mean_std(Metric::Auroc).0;
                if best.is_none_or(|(_, b)| auroc > b) {
                    best = Some((n, auroc));
                }
            }
            Err(e) => {
                table.push_str(&"\tnan".repeat(6));
                let _ = writeln!(table, "\tfailed: {}", e.to_string().replace(['\t', '\n'], " "));
            }
        }
    }
    write(&args.out, &table)?;
    record.output(&args.out);
    print!("{table}");
    let failed = results.iter().filter(|r| r.is_err()).count();
    match best {
        Some((n, auroc)) => {
            let c = &cells[n];
            println!(
                "best: alpha={:e} beta={:e} d={} auroc={auroc:.3} ({failed} of {} cells failed)",
                c.alpha,
                c.beta,
                c.d,
                cells.len()
            );
        }
        None => {
            finish(record, args.record, with_suffix(&args.out, ".run"))?;
            let first = results.into_iter().find_map(|r| r.err()).expect("every cell failed");
            return Err(first.into());
        }
    }
    finish(record, args.record, with_suffix(&args.out, ".run"))
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let mut record = RunRecord::new("synth");
    let spec = SyntheticSpec {
        bags: args.bags,
        instances: args.instances,
        labels: args.labels,
        bag_features: args.bag_features.clone(),
        instance_features: args.instance_features.clone(),
        rank: args.rank,
        noise: args.noise,
        observed_density: args.observed_density,
        noise_relations: args.noise_relations,
        noise_relation_size: args.noise_relation_size,
        label_density: (args.label_density > 0.0).then_some(args.label_density),
        labels_from_instances: !args.independent_bags,
        informative_views: args.informative_views,
        noise_views: args.noise_views,
        view_scale: args.view_scale,
        seed: args.seed,
    };
    record.seed(spec.seed);
    record.set("spec", format!("{spec:?}").replace('\n', " "));
    let written = record.time("generate", || write_synthetic(&spec, &args.out))?;
    for p in &written {
        record.output(p);
    }
    println!("{} files written; manifest {}", written.len(), args.out.join(SYNTH_MANIFEST).display());
    finish(record, args.record, args.out.join("run.txt"))
}
