use treebound::bounds::BoundCache;
use treebound::data::{iris, parse_dataset, split_dataset, to_csv, DataError};
use treebound::experiment::{run_experiment, ExperimentConfig, Model};
use treebound::induction::{grow_greedy, GrowthConstraints};
use treebound::pruning::{prune_bound, prune_cc, prune_km, prune_oracle, prune_re, CvConfig};
use treebound::PriorConfig;

#[test]
fn csv_round_trip_preserves_dataset() {
    let text = "nom(3),real,ord(4),label\n2,0.5,1,x\n3,-1.25,4,y\n1,7,2,x\n";
    let d = parse_dataset(text).unwrap();
    let back = parse_dataset(&to_csv(&d)).unwrap();
    assert_eq!(back.landscape, d.landscape);
    assert_eq!(back.examples, d.examples);
    assert_eq!(back.labels, d.labels);
    assert_eq!(back.class_names, d.class_names);

    let ir = iris();
    assert_eq!(parse_dataset(&to_csv(&ir)).unwrap().examples, ir.examples);
}

#[test]
fn malformed_inputs_are_rejected() {
    assert!(matches!(parse_dataset(""), Err(DataError::Schema(_))));
    assert!(matches!(parse_dataset("real,real\n1,2\n"), Err(DataError::Schema(_))));
    assert!(matches!(parse_dataset("real,blob,label\n1,2,a\n"), Err(DataError::Schema(_))));
    assert!(matches!(parse_dataset("ord(3),label\n4,a\n"), Err(DataError::Value { .. })));
    assert!(matches!(parse_dataset("real,label\nx,a\n"), Err(DataError::Value { .. })));
    let empty = parse_dataset("real,label\n").unwrap();
    assert!(matches!(split_dataset(&empty, 0.5, 0), Err(DataError::Empty)));
}

#[test]
fn split_sizes_follow_the_fraction() {
    let d = iris();
    let (train, test) = split_dataset(&d, 0.85, 3).unwrap();
    assert_eq!((train.len(), test.len()), (128, 22));
    let (again, _) = split_dataset(&d, 0.85, 3).unwrap();
    assert_eq!(again.examples, train.examples);
    assert!(matches!(split_dataset(&d, 1.0, 0), Err(DataError::Fraction(_))));
    assert!(matches!(split_dataset(&d, 0.0, 0), Err(DataError::Fraction(_))));
}

#[test]
fn iris_grow_then_prune() {
    let (train, test) = split_dataset(&iris(), 0.85, 0).unwrap();
    let t = grow_greedy(&train, &GrowthConstraints::default()).unwrap();
    assert_eq!(t.errors(&train).unwrap(), 0);
    let cache = BoundCache::new();

    let ours = prune_bound(&t, &train, &PriorConfig::default(), &cache).unwrap();
    let eps = ours.final_bound.unwrap();
    assert!(eps > 0.0 && eps < 3.0, "bound {eps}");
    assert!(ours.tree.n_leaves() < t.n_leaves());
    let acc = ours.tree.accuracy(&test).unwrap();
    assert!(acc > 0.7, "{acc} {}", ours.tree);

    let (val_train, val) = split_dataset(&train, 0.8, 1).unwrap();
    let t_re = grow_greedy(&val_train, &GrowthConstraints::default()).unwrap();
    let re = prune_re(&t_re, &val_train, &val).unwrap();
    assert!(re.tree.errors(&val).unwrap() <= t_re.errors(&val).unwrap());

    let cv = CvConfig::default();
    let (cc, alpha) = prune_cc(&t, &train, &cv).unwrap();
    assert!(alpha >= 0.0);
    assert!(cc.tree.n_leaves() <= t.n_leaves());

    let (km, c) = prune_km(&t, &train, &[1e-3, 1e-1, 1.0], 0.05, &cv, &cache).unwrap();
    assert!(c > 0.0);
    assert!(km.tree.n_leaves() <= t.n_leaves());

    let oracle = prune_oracle(&t, &train, &test).unwrap();
    assert!(oracle.tree.errors(&test).unwrap() <= t.errors(&test).unwrap());
}

#[test]
fn experiment_is_deterministic() {
    let cfg = ExperimentConfig { n_runs: 3, ..Default::default() };
    let d = iris();
    let a = run_experiment(&d, &cfg, &BoundCache::new()).unwrap();
    let b = run_experiment(&d, &cfg, &BoundCache::new()).unwrap();
    assert_eq!(a.records.len(), 3 * Model::ALL.len());
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!((x.run, x.model, &x.tree), (y.run, y.model, &y.tree));
        assert_eq!((x.test_acc, x.bound), (y.test_acc, y.bound));
    }
    for s in &a.summaries {
        assert_eq!(s.bound.is_some(), s.model == Model::Ours);
        assert_eq!(s.val_acc.is_some(), s.model == Model::Re);
    }
    let oracle = a.summary(Model::Oracle).unwrap().test_acc.mean;
    for s in &a.summaries {
        assert!(s.model == Model::Re || s.test_acc.mean <= oracle + 1e-12);
    }
}

#[test]
fn single_run_has_zero_spread() {
    let cfg = ExperimentConfig { n_runs: 1, models: vec![Model::Og, Model::Ours], ..Default::default() };
    let r = run_experiment(&iris(), &cfg, &BoundCache::new()).unwrap();
    for s in &r.summaries {
        assert_eq!(s.test_acc.std, 0.0);
        assert_eq!(s.leaves.std, 0.0);
    }
}
