#![allow(dead_code)]

use rand::Rng;
use survtree::bitset::Bitset;
use survtree::dataset::BinaryDataset;
use survtree::survival::leaf_curve;
use survtree::tree::{Leaf, SurvivalTree, TreeNode};
use survtree::{Curve, Dataset};
use survtree_testkit::{Fixture, Step};

pub fn dataset(f: &Fixture) -> Dataset {
    BinaryDataset::from_rows(&f.rows, f.times.clone(), f.events.clone()).unwrap()
}

pub fn to_step(c: &Curve) -> Step {
    Step {
        initial: c.initial(),
        jumps: c.breakpoints().iter().copied().zip(c.values().iter().copied()).collect(),
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

/// Random tree with Kaplan-Meier leaves; nonempty leaves only.
pub fn random_tree<R: Rng>(ds: &Dataset, max_depth: usize, rng: &mut R) -> SurvivalTree<f64> {
    let root = grow(ds.all_samples(), max_depth, ds, rng);
    SurvivalTree {
        root,
        lambda: 0.0,
        max_depth: Some(max_depth),
        objective: 0.0,
        columns: ds.feature_columns().to_vec(),
    }
}

fn grow<R: Rng>(support: Bitset, depth: usize, ds: &Dataset, rng: &mut R) -> TreeNode<f64> {
    if depth > 0 && rng.gen_bool(0.7) {
        let j = rng.gen_range(0..ds.n_features());
        let right = support.and(ds.column(j));
        let left = support.and_not(ds.column(j));
        if !left.is_empty() && !right.is_empty() {
            return TreeNode::Split {
                feature: j,
                name: ds.feature_name(j).to_owned(),
                left: Box::new(grow(left, depth - 1, ds, rng)),
                right: Box::new(grow(right, depth - 1, ds, rng)),
            };
        }
    }
    TreeNode::Leaf(Leaf {
        curve: leaf_curve(&support, ds).unwrap(),
        sample_count: support.count(),
    })
}

/// Prediction curve for every sample, in the oracle's representation.
pub fn sample_curves(tree: &SurvivalTree<f64>, ds: &Dataset) -> Vec<Step> {
    let leaves: Vec<Step> = tree.leaves().iter().map(|l| to_step(&l.curve)).collect();
    (0..ds.n_samples()).map(|i| leaves[tree.leaf_of(ds, i)].clone()).collect()
}
