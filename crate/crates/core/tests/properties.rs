use num_bigint::BigUint;
use num_traits::ToPrimitive;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use treebound::bounds::{log_parti_func_ub, parti_func_ub, shawe_taylor_epsilon, tree_pf_real, BoundCache};
use treebound::bruteforce::{enumerate_stump_partitions, enumerate_tree_partitions};
use treebound::combinatorics::{log_sum, stirling2, LogNumber};
use treebound::data::{split_dataset, Dataset, Example, FeatureLandscape};
use treebound::induction::{find_best_split, gini, grow_greedy, grow_greedy_traced, GrowthConstraints};
use treebound::pruning::{prune_bound, prune_cc_alpha, prune_km_with, prune_oracle, prune_re};
use treebound::verify::{check_dominance_instance, random_instance};
use treebound::{DecisionRule, PriorConfig, Tree, TreeShape};

fn arb_shape() -> impl Strategy<Value = TreeShape> {
    let leaf = Just(TreeShape::leaf());
    leaf.prop_recursive(4, 12, 2, |inner| {
        (inner.clone(), inner).prop_map(|(l, r)| TreeShape::node(l, r))
    })
}

fn arb_rule() -> impl Strategy<Value = DecisionRule> {
    prop_oneof![
        (0..3usize, -50i32..50).prop_map(|(feature, t)| DecisionRule::Real {
            feature,
            threshold: t as f64 / 4.0
        }),
        (0..2usize, 1..5u32).prop_map(|(feature, threshold)| DecisionRule::Ordinal { feature, threshold }),
        (0..2usize, 1..5u32).prop_map(|(feature, category)| DecisionRule::Nominal { feature, category }),
    ]
}

fn arb_tree() -> impl Strategy<Value = Tree> {
    (0..3usize).prop_map(Tree::leaf).prop_recursive(4, 16, 2, |inner| {
        (arb_rule(), inner.clone(), inner).prop_map(|(r, a, b)| Tree::node(r, a, b))
    })
}

/// Two-feature real dataset with noisy labels driven by the first feature.
fn arb_dataset(max_m: usize) -> impl Strategy<Value = Dataset> {
    prop::collection::vec((0..40u32, 0..40u32, 0..10u32), 6..max_m).prop_map(|rows| {
        let examples = rows.iter().map(|&(a, b, _)| Example::real(vec![a as f64, b as f64])).collect();
        let labels = rows
            .iter()
            .map(|&(a, _, noise)| usize::from(a >= 20) ^ usize::from(noise == 0))
            .collect();
        Dataset::new(FeatureLandscape::real(2), examples, labels, 2).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tree_text_round_trips(t in arb_tree()) {
        let back: Tree = t.to_string().parse().unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn shape_text_round_trips_and_mirrors_compare_equal(s in arb_shape()) {
        let back: TreeShape = s.to_string().parse().unwrap();
        prop_assert_eq!(&back, &s);
        if let Some((l, r)) = s.children() {
            prop_assert_eq!(TreeShape::node(r.clone(), l.clone()), s.clone());
        }
    }

    #[test]
    fn bounds_dominate_enumeration(seed in any::<u64>()) {
        let cache = BoundCache::new();
        let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(check_dominance_instance(&inst, &cache), None);
    }

    #[test]
    fn enumeration_ignores_example_order(seed in any::<u64>(), rot in 0usize..7) {
        let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let m = inst.sample.len();
        let order: Vec<usize> = (0..m).map(|i| (i + rot) % m).rev().collect();
        let perm = inst.sample.subset(&order);
        prop_assert_eq!(
            enumerate_stump_partitions(&inst.sample).len(),
            enumerate_stump_partitions(&perm).len()
        );
        prop_assert_eq!(
            enumerate_tree_partitions(&inst.shape, &inst.sample, inst.c).unwrap().histogram(),
            enumerate_tree_partitions(&inst.shape, &perm, inst.c).unwrap().histogram()
        );
    }

    #[test]
    fn real_bound_is_monotone_in_features(s in arb_shape(), m in 2usize..20, ell in 1usize..5, c in 2usize..4) {
        let cache = BoundCache::new();
        let here = tree_pf_real(&s, c, m, ell, &cache);
        prop_assert!(here <= tree_pf_real(&s, c, m, ell + 1, &cache));
        prop_assert!(here <= stirling2(m as u64, c as u64));
        let ls = FeatureLandscape::real(ell);
        let parti = parti_func_ub(&s, c, m, &ls, &cache);
        prop_assert!(here <= parti);
        if let Some(p) = parti.to_f64().filter(|p| *p > 0.0) {
            prop_assert!(log_parti_func_ub(&s, c, m, &ls, &cache).ln() >= p.ln() - 1e-9);
        }
    }

    #[test]
    fn log_sum_matches_direct_sum(xs in prop::collection::vec(0u64..1_000_000, 1..10)) {
        let terms: Vec<LogNumber> = xs.iter().map(|&x| LogNumber::from_u64(x)).collect();
        let total: u64 = xs.iter().sum();
        let got = log_sum(&terms).unwrap();
        if total == 0 {
            prop_assert!(got.is_zero());
        } else {
            prop_assert!((got.ln() - (total as f64).ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn gini_stays_in_range(z in prop::collection::vec(0usize..50, 1..6)) {
        let g = gini(&z);
        prop_assert!(g >= 0.0);
        prop_assert!(g <= 1.0 - 1.0 / z.len() as f64 + 1e-12);
    }

    #[test]
    fn growth_respects_leaf_budget(d in arb_dataset(60), budget in 1usize..12) {
        let c = GrowthConstraints { max_leaves: budget, ..Default::default() };
        let (t, trace) = grow_greedy_traced(&d, &c).unwrap();
        prop_assert!(t.n_leaves() <= budget);
        for w in trace.windows(2) {
            prop_assert_eq!(w[1].leaves, w[0].leaves + 1);
            prop_assert!(w[1].train_errors <= w[0].train_errors);
        }
        prop_assert_eq!(trace.last().unwrap().leaves, t.n_leaves());
    }

    #[test]
    fn distinct_reals_are_fit_exactly(perm in Just((0..30).collect::<Vec<u32>>()).prop_shuffle(), labels in prop::collection::vec(0usize..3, 30)) {
        let examples = perm.iter().map(|&v| Example::real(vec![v as f64])).collect();
        let d = Dataset::new(FeatureLandscape::real(1), examples, labels, 3).unwrap();
        let t = grow_greedy(&d, &GrowthConstraints::default()).unwrap();
        prop_assert_eq!(t.errors(&d).unwrap(), 0);
    }

    #[test]
    fn split_score_ignores_feature_order(d in arb_dataset(40)) {
        let swapped_examples = d.examples.iter().map(|x| Example::real(vec![x.reals[1], x.reals[0]])).collect();
        let swapped = Dataset::new(d.landscape.clone(), swapped_examples, d.labels.clone(), 2).unwrap();
        let idx: Vec<usize> = (0..d.len()).collect();
        let a = find_best_split(&d, &idx, true).unwrap().map(|s| s.score);
        let b = find_best_split(&swapped, &idx, true).unwrap().map(|s| s.score);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn pruners_shrink_and_bound_decreases(d in arb_dataset(80), seed in 0u64..1000) {
        let (train, test) = split_dataset(&d, 0.7, seed).unwrap();
        prop_assume!(!test.is_empty());
        let t = grow_greedy(&train, &GrowthConstraints::default()).unwrap();
        let cache = BoundCache::new();
        let cfg = PriorConfig::default();
        let ours = prune_bound(&t, &train, &cfg, &cache).unwrap();
        for w in ours.history.windows(2) {
            prop_assert!(w[1].score <= w[0].score);
            prop_assert!(w[1].leaves < w[0].leaves);
        }
        let eps = |tree: &Tree| shawe_taylor_epsilon(
            train.len(), tree.errors(&train).unwrap(), &tree.shape(), &train.landscape, 2, &cfg, &cache);
        prop_assert_eq!(ours.final_bound, Some(eps(&ours.tree)));
        prop_assert!(eps(&ours.tree) <= eps(&t));
        let oracle = prune_oracle(&t, &train, &test).unwrap();
        let others = [
            ours.tree.clone(),
            prune_re(&t, &train, &train).unwrap().tree,
            prune_cc_alpha(&t, &train, 0.5).unwrap().tree,
            prune_km_with(&t, &train, 0.1, 0.05, &cache).unwrap().tree,
            t.clone(),
        ];
        let best = oracle.tree.errors(&test).unwrap();
        for o in &others {
            prop_assert!(o.n_leaves() <= t.n_leaves());
        }
        // the oracle greedily minimizes test error starting from t, so it never does worse than t
        prop_assert!(best <= t.errors(&test).unwrap());
        prop_assert_eq!(prune_bound(&t, &train, &cfg, &cache).unwrap(), ours);
    }
}

#[test]
fn stirling_rows_sum_to_bell_numbers() {
    let bell = [1u64, 1, 2, 5, 15, 52, 203, 877, 4140];
    for (m, &b) in bell.iter().enumerate().skip(1) {
        let total: BigUint = (1..=m as u64).map(|c| stirling2(m as u64, c)).sum();
        assert_eq!(total, BigUint::from(b));
    }
}
