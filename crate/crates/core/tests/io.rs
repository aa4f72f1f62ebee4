mod common;

use std::fs;

use common::random_graph;
use fusionmf::eval::{EvalReport, FoldRecord};
use fusionmf::graph::FusionGraph;
use fusionmf::io::*;
use fusionmf::solver::{fit, objective, SolverConfig};
use fusionmf::Error;

#[test]
fn graphs_survive_a_save_load_cycle() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..10 {
        let graph = random_graph(seed);
        let path = dir.path().join(format!("g{seed}")).join("graph.mf");
        save_graph(&graph, &path).unwrap();
        let back: FusionGraph<f64> = load_graph(&path).unwrap();
        assert_eq!(back.types(), graph.types());
        assert_eq!(back.roles(), graph.roles());
        assert_eq!(back.relations().len(), graph.relations().len());
        for (a, b) in back.relations().iter().zip(graph.relations()) {
            assert_eq!((a.source, a.target), (b.source, b.target));
            assert_eq!(a.matrix.dense(), b.matrix.dense());
            assert_eq!(a.observed, b.observed);
        }
        for (a, b) in back.views().iter().zip(graph.views()) {
            assert_eq!((a.type_id, a.view), (b.type_id, b.view));
            assert_eq!(a.matrix.dense(), b.matrix.dense());
        }
    }
}

#[test]
fn saved_model_reproduces_objective() {
    let dir = tempfile::tempdir().unwrap();
    let graph = random_graph(17);
    let config = SolverConfig::default().with_rank(2).with_ridges(1.0, 1.0).with_max_iters(10);
    let model = fit(&graph, &config).unwrap();
    let path = dir.path().join("model.txt");
    save_model(&model, &path).unwrap();
    let back = load_model::<f64>(&path).unwrap();
    let (a, b) = (objective(&graph, &model, &config).unwrap(), objective(&graph, &back, &config).unwrap());
    assert!((a - b).abs() <= 1e-14 * a.abs(), "{a} vs {b}");
}

#[test]
fn manifest_without_membership_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("target.txt"), "# 2 2 dense\n1 0\n0 1\n").unwrap();
    let manifest = "\
[types]
bags = 2
instances = 3
labels = 2

[roles]
bag = bags
instance = instances
label = labels
target = bags labels

[relation bags labels]
file = target.txt
";
    let path = dir.path().join("graph.mf");
    fs::write(&path, manifest).unwrap();
    let err = load_graph::<f64>(&path).unwrap_err();
    assert!(matches!(err, Error::InvalidGraph(_)), "{err}");
    assert!(err.to_string().contains("bag-instance"), "{err}");
}

#[test]
fn unstructured_manifest_loads() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("r.txt"), "# 2 3 sparse\n0 2 1.5\n1 0 2\n").unwrap();
    fs::write(dir.path().join("m.txt"), "# 2 3 dense\n1 1 1\n0 1 1\n").unwrap();
    let manifest = "[types]\na = 2\nb = 3\n\n[relation a b]\nfile = r.txt\nformat = sparse\nmask = m.txt\n";
    let path = dir.path().join("graph.mf");
    fs::write(&path, manifest).unwrap();
    let graph = load_graph::<f64>(&path).unwrap();
    assert!(graph.roles().is_none());
    let rel = graph.relation(0, 1).unwrap().unwrap();
    assert_eq!(rel.matrix.dense()[(0, 2)], 1.5);
    assert!(!rel.is_observed(1, 0));
}

#[test]
fn format_tag_must_match_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("r.txt"), "# 1 1 dense\n1\n").unwrap();
    let path = dir.path().join("graph.mf");
    fs::write(&path, "[types]\na = 1\nb = 1\n[relation a b]\nfile = r.txt\nformat = sparse\n").unwrap();
    assert!(load_graph::<f64>(&path).is_err());
}

#[test]
fn synthetic_directory_is_loadable() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec::three_type(6, 10, 4, 2).with_seed(3);
    write_synthetic(&spec, dir.path()).unwrap();
    let graph = load_graph::<f64>(&dir.path().join(SYNTH_MANIFEST)).unwrap();
    let (direct, _) = generate_synthetic(&spec).unwrap();
    assert_eq!(graph.target().unwrap().matrix.dense(), direct.target().unwrap().matrix.dense());
    assert!(dir.path().join("truth_labels.txt").exists());
}

#[test]
fn reports_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let rec = |round, fold, v: f64| FoldRecord {
        round,
        fold,
        avg_f1: v / 2.0,
        auroc: v,
        auprc: v / 4.0,
        k: 3,
        skipped_labels: 0,
    };
    let mut report = EvalReport {
        method: "full".into(),
        folds: vec![rec(0, 0, 0.9), rec(0, 1, 0.93), rec(1, 0, 0.91)],
        comparisons: vec![],
    };
    let other = EvalReport {
        method: "dfmf".into(),
        folds: vec![rec(0, 0, 0.8), rec(0, 1, 0.85), rec(1, 0, 0.82)],
        comparisons: vec![],
    };
    report.compare_with(&other).unwrap();
    let path = dir.path().join("report.txt");
    save_report(&report, &path).unwrap();
    assert_eq!(load_report(&path).unwrap(), report);
}
