mod common;

use common::{dataset, random_tree};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use survtree::bitset::Bitset;
use survtree::metrics::{cumulative_dynamic_auc, default_eval_times, harrell_c, uno_c, Predictions};
use survtree::solver::{greedy_tree, solve, split_support, SolverOptions};
use survtree::survival::tree_loss;
use survtree::{km_estimator, BoundConfig};
use survtree_testkit as oracle;

fn survival_data() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    prop::collection::vec((1u32..40, any::<bool>()), 1..60)
        .prop_map(|v| v.into_iter().map(|(t, e)| (t as f64 * 0.5, e)).unzip())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kaplan_meier_is_a_survival_curve((times, events) in survival_data()) {
        let s = km_estimator(&times, &events).unwrap();
        prop_assert!(s.is_nonincreasing());
        prop_assert!(s.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert_eq!(s.breakpoints().len(), {
            let mut deaths: Vec<f64> = times.iter().zip(&events).filter(|(_, &e)| e).map(|(&t, _)| t).collect();
            deaths.sort_by(f64::total_cmp);
            deaths.dedup();
            deaths.len()
        });
    }

    #[test]
    fn splits_partition_the_support(seed in any::<u64>(), keep in prop::collection::vec(any::<bool>(), 30)) {
        let f = oracle::random_fixture(seed, 30, 4, 0.3);
        let ds = dataset(&f);
        let support = Bitset::from_bools(&keep);
        for j in 0..ds.n_features() {
            let (left, right) = split_support(&support, j, &ds);
            prop_assert!(left.is_disjoint(&right));
            prop_assert_eq!(left.or(&right), support.clone());
            prop_assert!(right.iter().all(|i| f.rows[i][j]));
            prop_assert!(left.iter().all(|i| !f.rows[i][j]));
        }
    }

    #[test]
    fn concordance_ignores_monotone_transforms(seed in 0u64..1000) {
        let f = oracle::random_fixture(seed, 25, 3, 0.4);
        let ds = dataset(&f);
        let tree = random_tree(&ds, 3, &mut ChaCha8Rng::seed_from_u64(seed));
        let p = tree.predictions(&ds);
        let cubed = Predictions::new(p.curves.iter().map(|c| c.map(|v| v * v * v)).collect(), p.assignment.clone()).unwrap();
        let reversed = Predictions::new(p.curves.iter().map(|c| c.map(|v| 1.0 - v)).collect(), p.assignment.clone()).unwrap();
        if let Ok(c) = harrell_c(&p, &ds) {
            prop_assert!((harrell_c(&cubed, &ds).unwrap() - c).abs() < 1e-12);
            prop_assert!((harrell_c(&reversed, &ds).unwrap() + c - 1.0).abs() < 1e-12);
            let u = uno_c(&p, &ds).unwrap();
            prop_assert!((uno_c(&cubed, &ds).unwrap() - u).abs() < 1e-12);
            prop_assert!((uno_c(&reversed, &ds).unwrap() + u - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_auc_lies_within_the_curve(seed in 0u64..1000) {
        let f = oracle::random_fixture(seed, 30, 3, 0.3);
        let ds = dataset(&f);
        let tree = random_tree(&ds, 3, &mut ChaCha8Rng::seed_from_u64(seed));
        if let Ok(curve) = cumulative_dynamic_auc(&tree.predictions(&ds), &ds, &default_eval_times(&ds)) {
            let lo = curve.auc.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = curve.auc.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(curve.mean_auc >= lo - 1e-12 && curve.mean_auc <= hi + 1e-12);
            prop_assert!(curve.auc.iter().all(|a| (0.0..=1.0).contains(a)));
        }
    }

    #[test]
    fn solver_bookkeeping(seed in 0u64..1000, depth in 1usize..4, lambda in prop::sample::select(vec![0.002, 0.01, 0.05])) {
        let f = oracle::random_fixture(seed, 24, 4, 0.4);
        let ds = dataset(&f);
        let config = BoundConfig::new(lambda, Some(depth)).with_min_leaf(2);
        let options = SolverOptions { audit: true, ..SolverOptions::default() };
        let r = solve(&ds, &config, options).unwrap();
        prop_assert!(r.proven_optimal);
        prop_assert_eq!(r.stats.monotonicity_violations, 0);
        prop_assert_eq!(r.stats.enqueue_violations, 0);
        prop_assert_eq!(r.stats.lookups - r.stats.cache_hits, r.stats.graph_size as u64);
        prop_assert!(r.lower_bound <= r.upper_bound + 1e-12);
        prop_assert!((r.objective - r.upper_bound).abs() < 1e-12);
        let loss = tree_loss(&r.tree, &ds).unwrap();
        prop_assert!(loss >= 0.0);
        prop_assert!((loss + lambda * r.tree.leaf_count() as f64 - r.objective).abs() < 1e-12);
        prop_assert!(r.tree.leaves().iter().all(|l| l.sample_count >= 2));
        prop_assert!(greedy_tree(&ds, &config).objective >= r.objective - 1e-12);
    }
}
