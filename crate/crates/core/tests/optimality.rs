mod common;

use common::dataset;
use survtree::solver::{greedy_tree, solve, Schedule, SolverOptions};
use survtree::BoundConfig;
use survtree_testkit as oracle;

fn cases() -> impl Iterator<Item = (u64, oracle::Fixture)> {
    (0..12u64).map(|s| {
        let n = 12 + (s as usize * 7) % 25;
        let m = 3 + s as usize % 4;
        (s, oracle::random_fixture(900 + s, n, m, if s % 2 == 0 { 0.2 } else { 0.5 }))
    })
}

#[test]
fn solver_matches_brute_force() {
    for (s, f) in cases() {
        let ds = dataset(&f);
        for (depth, lambda, min_leaf) in [(2, 0.01, 1), (3, 0.01, 2), (3, 0.002, 1), (2, 0.05, 3)] {
            let (expected, _) = oracle::brute_force(&f, lambda, depth, min_leaf);
            let config = BoundConfig::new(lambda, Some(depth)).with_min_leaf(min_leaf);
            let result = solve(&ds, &config, SolverOptions::default()).unwrap();
            assert!(result.proven_optimal);
            assert!(
                (result.objective - expected).abs() <= 1e-9,
                "fixture {s} d={depth} lambda={lambda}: {} vs {expected}",
                result.objective
            );
            assert!(result.tree.depth() <= depth);
            assert!(result.tree.paths_are_simple());
        }
    }
}

#[test]
fn greedy_never_beats_the_solver() {
    for (_, f) in cases() {
        let ds = dataset(&f);
        let config = BoundConfig::new(0.005, Some(3)).with_min_leaf(1);
        let exact = solve(&ds, &config, SolverOptions::default()).unwrap();
        assert!(greedy_tree(&ds, &config).objective >= exact.objective - 1e-12);
    }
}

/// Two features whose effect on survival only shows jointly.
#[test]
fn greedy_misses_an_interaction() {
    let mut rows = Vec::new();
    let mut times = Vec::new();
    for rep in 0..6 {
        for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
            // a decoy feature that is mildly informative on its own
            rows.push(vec![a, b, (a ^ b) == (rep % 3 == 0)]);
            times.push(if a ^ b { 1.0 + rep as f64 } else { 20.0 + rep as f64 });
        }
    }
    let events = vec![true; rows.len()];
    let ds = survtree::Dataset::from_rows(&rows, times, events).unwrap();
    let config = BoundConfig::new(0.001, Some(2)).with_min_leaf(1);
    let exact = solve(&ds, &config, SolverOptions::default()).unwrap();
    let greedy = greedy_tree(&ds, &config);
    assert!(greedy.objective > exact.objective + 1e-6, "{} vs {}", greedy.objective, exact.objective);
}

#[test]
fn schedules_agree() {
    for (_, f) in cases() {
        let ds = dataset(&f);
        let config = BoundConfig::new(0.01, Some(3)).with_min_leaf(1);
        let objectives: Vec<f64> = [Schedule::Priority, Schedule::LowerBound, Schedule::Fifo, Schedule::Lifo]
            .into_iter()
            .map(|schedule| {
                let options = SolverOptions { schedule, ..SolverOptions::default() };
                solve(&ds, &config, options).unwrap().objective
            })
            .collect();
        assert!(objectives.iter().all(|&o| (o - objectives[0]).abs() <= 1e-12), "{objectives:?}");
    }
}

#[test]
fn single_precision_finds_the_same_trees() {
    for (_, f) in cases().take(6) {
        let ds64 = dataset(&f);
        let times: Vec<f32> = f.times.iter().map(|&t| t as f32).collect();
        let ds32 = survtree::Dataset32::from_rows(&f.rows, times, f.events.clone()).unwrap();
        let exact = solve(&ds64, &BoundConfig::new(0.01, Some(3)).with_min_leaf(2), SolverOptions::default()).unwrap();
        let single = solve(&ds32, &BoundConfig::new(0.01f32, Some(3)).with_min_leaf(2), SolverOptions::default()).unwrap();
        assert!(single.proven_optimal);
        assert!((single.objective as f64 - exact.objective).abs() < 1e-5);
        assert_eq!(single.tree.leaf_count(), exact.tree.leaf_count());
    }
}
