mod common;

use common::{dataset, random_tree, sample_curves};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use survtree::metrics::{cumulative_dynamic_auc, default_eval_times, evaluate, harrell_c, uno_c, MetricError};
use survtree_testkit as oracle;

#[test]
fn concordance_matches_pair_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for s in 0..30 {
        let f = oracle::random_fixture(600 + s, rng.gen_range(10..40), 3, [0.0, 0.3, 0.6][s as usize % 3]);
        let ds = dataset(&f);
        let tree = random_tree(&ds, 3, &mut rng);
        let curves = sample_curves(&tree, &ds);
        let refs: Vec<&oracle::Step> = curves.iter().collect();
        let p = tree.predictions(&ds);
        for (ours, uno) in [(harrell_c(&p, &ds), false), (uno_c(&p, &ds), true)] {
            match (ours, oracle::concordance_pairs(&f, &refs, uno)) {
                (Ok(a), Some(b)) => assert!((a - b).abs() <= 1e-12, "fixture {s} uno={uno}: {a} vs {b}"),
                (Err(MetricError::NoComparablePairs), None) => {}
                (a, b) => panic!("fixture {s} uno={uno}: {a:?} vs {b:?}"),
            }
        }
    }
}

#[test]
fn auc_matches_double_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for s in 0..30 {
        let f = oracle::random_fixture(700 + s, rng.gen_range(10..40), 3, 0.4);
        let ds = dataset(&f);
        let tree = random_tree(&ds, 3, &mut rng);
        let curves = sample_curves(&tree, &ds);
        let refs: Vec<&oracle::Step> = curves.iter().collect();
        let Ok(auc) = cumulative_dynamic_auc(&tree.predictions(&ds), &ds, &default_eval_times(&ds)) else {
            continue;
        };
        for (&t, &a) in auc.times.iter().zip(&auc.auc) {
            let b = oracle::auc_double_sum(&f, &refs, t).unwrap();
            assert!((a - b).abs() <= 1e-12, "fixture {s} t={t}: {a} vs {b}");
        }
    }
}

#[test]
fn single_leaf_has_zero_ratio_and_half_concordance() {
    let f = oracle::random_fixture(5, 20, 2, 0.3);
    let ds = dataset(&f);
    let tree = random_tree(&ds, 0, &mut ChaCha8Rng::seed_from_u64(0));
    let report = evaluate(&tree, &ds).unwrap();
    assert_eq!(report.leaf_count, 1);
    assert!(report.ibs_ratio.abs() < 1e-12);
    assert!((report.harrell_c - 0.5).abs() < 1e-12);
    assert!((report.uno_c - 0.5).abs() < 1e-12);
    assert!((report.mean_auc - 0.5).abs() < 1e-12);
}
