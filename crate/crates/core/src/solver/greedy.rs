//! Top-down greedy baseline under the same objective as the exact solver.

use rand::seq::index::sample;
use rand::Rng;

use crate::bitset::Bitset;
use crate::bounds::BoundConfig;
use crate::dataset::BinaryDataset;
use crate::num::Real;
use crate::survival::{leaf_curve, leaf_loss_value, tree_loss};
use crate::tree::{Leaf, SurvivalTree, TreeNode};

use super::split_support;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GreedyOptions {
    /// Features drawn at random per node; `None` considers all of them.
    pub max_features: Option<usize>,
}

/// Greedy tree using every feature at every node.
pub fn greedy_tree<T: Real>(ds: &BinaryDataset<T>, config: &BoundConfig<T>) -> SurvivalTree<T> {
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    greedy_tree_with(ds, config, GreedyOptions::default(), &mut rng)
}

pub fn greedy_tree_with<T: Real, R: Rng + ?Sized>(
    ds: &BinaryDataset<T>,
    config: &BoundConfig<T>,
    options: GreedyOptions,
    rng: &mut R,
) -> SurvivalTree<T> {
    let depth = config.max_depth.unwrap_or(usize::MAX);
    let root = grow(ds.all_samples(), depth, ds, config, options, rng);
    let mut tree = SurvivalTree {
        root,
        lambda: config.lambda,
        max_depth: config.max_depth,
        objective: T::zero(),
        columns: ds.feature_columns().to_vec(),
    };
    let loss = tree_loss(&tree, ds).expect("greedy leaves partition the samples");
    tree.objective = loss + config.lambda * T::from_count(tree.leaf_count());
    tree
}

fn grow<T: Real, R: Rng + ?Sized>(
    support: Bitset,
    depth: usize,
    ds: &BinaryDataset<T>,
    config: &BoundConfig<T>,
    options: GreedyOptions,
    rng: &mut R,
) -> TreeNode<T> {
    let count = support.count();
    let leaf = |support: &Bitset| {
        TreeNode::Leaf(Leaf {
            curve: leaf_curve(support, ds).expect("greedy supports are nonempty"),
            sample_count: count,
        })
    };
    if depth == 0 || count < 2 * config.min_leaf_size {
        return leaf(&support);
    }
    let m = ds.n_features();
    let candidates: Vec<usize> = match options.max_features {
        Some(k) if k < m => {
            let mut drawn = sample(rng, m, k.max(1)).into_vec();
            drawn.sort_unstable();
            drawn
        }
        _ => (0..m).collect(),
    };
    let mut best: Option<(T, usize)> = None;
    for feature in candidates {
        let right = support.intersection_count(ds.column(feature));
        if right < config.min_leaf_size || count - right < config.min_leaf_size {
            continue;
        }
        let (l, r) = split_support(&support, feature, ds);
        let loss = leaf_loss_value(&l, ds) + leaf_loss_value(&r, ds);
        if best.is_none_or(|(b, _)| loss < b) {
            best = Some((loss, feature));
        }
    }
    let Some((split_loss, feature)) = best else {
        return leaf(&support);
    };
    if leaf_loss_value(&support, ds) - split_loss < config.lambda {
        return leaf(&support);
    }
    let (l, r) = split_support(&support, feature, ds);
    TreeNode::Split {
        feature,
        name: ds.feature_name(feature).to_owned(),
        left: Box::new(grow(l, depth - 1, ds, config, options, rng)),
        right: Box::new(grow(r, depth - 1, ds, config, options, rng)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve, SolverOptions};

    #[test]
    fn agrees_with_solver_on_single_relevant_feature() {
        let rows: Vec<Vec<bool>> = (0..16).map(|i| vec![i % 3 == 0, i < 8]).collect();
        let times = (0..16).map(|i| if i < 8 { 40.0 + i as f64 } else { 1.0 + i as f64 }).collect();
        let ds = BinaryDataset::<f64>::from_rows(&rows, times, vec![true; 16]).unwrap();
        let config = BoundConfig::new(0.01, Some(1)).with_min_leaf(2);
        let greedy = greedy_tree(&ds, &config);
        let exact = solve(&ds, &config, SolverOptions::default()).unwrap();
        assert!((greedy.objective - exact.objective).abs() < 1e-12);
        assert!(matches!(greedy.root, TreeNode::Split { feature: 1, .. }));
    }

    #[test]
    fn large_penalty_stays_a_leaf() {
        let rows: Vec<Vec<bool>> = (0..10).map(|i| vec![i < 5]).collect();
        let times = (1..=10).map(f64::from).collect();
        let ds = BinaryDataset::<f64>::from_rows(&rows, times, vec![true; 10]).unwrap();
        let tree = greedy_tree(&ds, &BoundConfig::new(1.0, Some(3)).with_min_leaf(1));
        assert_eq!(tree.leaf_count(), 1);
    }
}
