//! Dynamic programming with bounds over a dependency graph of subproblems.
//!
//! A subproblem is identified by the samples it captures and its remaining
//! depth budget. Each subproblem keeps a lower and an upper bound on the best
//! objective of any subtree over its support; the search refines these from
//! the children's bounds until the root's bounds meet.

mod greedy;
mod queue;

use std::collections::HashMap;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::bitset::Bitset;
use crate::bounds::{
    fails_bounds, incremental_progress_check, initial_lower_bound, leaf_count_cap, parent_leaf_cap, BoundConfig,
    BoundError, BoundsPair, NodeSummary,
};
use crate::dataset::BinaryDataset;
use crate::num::Real;
use crate::survival::{leaf_curve, leaf_loss_value, tree_loss};
use crate::tree::{Leaf, SurvivalTree, TreeNode};

pub use greedy::{greedy_tree, greedy_tree_with, GreedyOptions};
pub use queue::Schedule;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Config(#[from] BoundError),
    #[error("dataset has {samples} samples, fewer than the minimum leaf size {min_leaf}")]
    TooFewSamples { samples: usize, min_leaf: usize },
    #[error("dependency graph exceeded {limit} subproblems after {} iterations", stats.iterations)]
    NodeLimit { limit: usize, stats: SolveStats },
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolverOptions {
    pub schedule: Schedule,
    pub time_limit: Option<Duration>,
    /// Upper limit on materialized subproblems.
    pub node_limit: Option<usize>,
    /// Record bound-monotonicity and enqueue-filter checks in the stats.
    pub audit: bool,
}

/// Canonical identity of a subproblem.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SupportKey {
    pub support: Bitset,
    pub depth_budget: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeState {
    Open,
    ClosedAsLeaf,
    ClosedAsSplit(usize),
}

#[derive(Clone, Copy, Debug)]
struct SplitEntry {
    feature: usize,
    left: usize,
    right: usize,
}

#[derive(Debug)]
struct Node<T> {
    key: SupportKey,
    count: usize,
    leaf_loss: T,
    leaf_objective: T,
    bounds: BoundsPair<T>,
    parents: Vec<usize>,
    splits: Option<Vec<SplitEntry>>,
    terminal: bool,
    /// Popped and bounded at least once; later changes arrive through its children.
    processed: bool,
    version: u64,
    queued_version: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: u64,
    pub graph_size: usize,
    pub queue_pushes: u64,
    pub lookups: u64,
    pub cache_hits: u64,
    pub elapsed: Duration,
    pub timed_out: bool,
    /// Audit: a recomputed upper bound exceeded the stored one, or a stored
    /// lower bound had to be lowered onto the upper bound.
    pub monotonicity_violations: u64,
    /// Audit: a child pair was enqueued with a lower-bound sum above the parent's upper bound.
    pub enqueue_violations: u64,
}

#[derive(Clone, Debug)]
pub struct SolveResult<T> {
    pub tree: SurvivalTree<T>,
    pub objective: T,
    pub lower_bound: T,
    pub upper_bound: T,
    pub proven_optimal: bool,
    /// `(ub - lb) / max(ub, eps)`; zero when proven optimal.
    pub gap: T,
    pub stats: SolveStats,
}

/// Train a tree minimizing loss plus `lambda` per leaf.
pub fn solve<T: Real>(ds: &BinaryDataset<T>, config: &BoundConfig<T>, options: SolverOptions) -> Result<SolveResult<T>, SolveError> {
    let mut solver = Solver::new(ds, config, options)?;
    solver.run()?;
    Ok(solver.finish())
}

/// Left side has feature value 0, right side value 1.
pub fn split_support<T: Real>(support: &Bitset, feature: usize, ds: &BinaryDataset<T>) -> (Bitset, Bitset) {
    let column = ds.column(feature);
    (support.and_not(column), support.and(column))
}

/// Search state; exposed so callers can run the loop and inspect the graph.
pub struct Solver<'a, T> {
    ds: &'a BinaryDataset<T>,
    config: &'a BoundConfig<T>,
    options: SolverOptions,
    nodes: Vec<Node<T>>,
    index: HashMap<SupportKey, usize>,
    queue: queue::WorkQueue,
    root: usize,
    seq: u64,
    stats: SolveStats,
    started: Instant,
}

impl<'a, T: Real> Solver<'a, T> {
    pub fn new(ds: &'a BinaryDataset<T>, config: &'a BoundConfig<T>, options: SolverOptions) -> Result<Self, SolveError> {
        config.validate(ds.n_samples())?;
        if ds.n_samples() < config.min_leaf_size {
            return Err(SolveError::TooFewSamples {
                samples: ds.n_samples(),
                min_leaf: config.min_leaf_size,
            });
        }
        let mut solver = Self {
            ds,
            config,
            options,
            nodes: Vec::new(),
            index: HashMap::new(),
            queue: queue::WorkQueue::new(options.schedule),
            root: 0,
            seq: 0,
            stats: SolveStats::default(),
            started: Instant::now(),
        };
        let full = ds.all_samples();
        let mut depth = config.max_depth.unwrap_or(usize::MAX).min(ds.n_features());
        if config.use_leaf_caps {
            let leaf_objective = leaf_loss_value(&full, ds) + config.lambda;
            let cap = leaf_count_cap(leaf_objective, config.lambda, ds.n_features());
            depth = depth.min(cap.saturating_sub(1));
        }
        solver.root = solver.find_or_create(full, depth);
        solver.push(solver.root);
        Ok(solver)
    }

    fn find_or_create(&mut self, support: Bitset, depth_budget: usize) -> usize {
        self.stats.lookups += 1;
        let key = SupportKey { support, depth_budget };
        if let Some(&id) = self.index.get(&key) {
            self.stats.cache_hits += 1;
            return id;
        }
        let ds = self.ds;
        let config = self.config;
        let count = key.support.count();
        let leaf_loss = leaf_loss_value(&key.support, ds);
        let ub = leaf_loss + config.lambda;
        let lb = initial_lower_bound(&key.support, ds, config, ub).expect("reference losses validated");
        let mut bounds = BoundsPair { lb, ub };
        let summary = NodeSummary {
            leaf_loss,
            sample_count: count,
            depth_budget,
            bounds,
        };
        let terminal = fails_bounds(&summary, config);
        if terminal {
            bounds.lb = ub;
        }
        let id = self.nodes.len();
        self.index.insert(key.clone(), id);
        self.nodes.push(Node {
            key,
            count,
            leaf_loss,
            leaf_objective: ub,
            bounds,
            parents: Vec::new(),
            splits: None,
            terminal,
            processed: false,
            version: 0,
            queued_version: None,
        });
        self.stats.graph_size = self.nodes.len();
        id
    }

    fn push(&mut self, id: usize) {
        let node = &mut self.nodes[id];
        if node.queued_version == Some(node.version) {
            return;
        }
        node.queued_version = Some(node.version);
        let fraction = node.count as f64 / self.ds.n_samples() as f64;
        let lb = node.bounds.lb.as_f64();
        self.seq += 1;
        self.stats.queue_pushes += 1;
        self.queue.push(id, fraction, lb, self.seq);
    }

    /// Child depth budget after a split of `id`.
    fn child_budget(&self, id: usize) -> usize {
        let node = &self.nodes[id];
        let mut budget = node.key.depth_budget - 1;
        if self.config.use_leaf_caps {
            // both children together hold at most this many leaves
            let total = parent_leaf_cap(node.bounds.ub, self.config.lambda, T::zero(), 2, self.ds.n_features());
            budget = budget.min(total.saturating_sub(2));
        }
        budget
    }

    fn expand(&mut self, id: usize) {
        let ds = self.ds;
        let min_leaf = self.config.min_leaf_size;
        let budget = self.child_budget(id);
        let support = self.nodes[id].key.support.clone();
        let parent_loss = self.nodes[id].leaf_loss;
        let mut splits = Vec::new();
        for feature in 0..ds.n_features() {
            let right_count = support.intersection_count(ds.column(feature));
            let left_count = self.nodes[id].count - right_count;
            if left_count < min_leaf || right_count < min_leaf {
                continue;
            }
            let (left_set, right_set) = split_support(&support, feature, ds);
            let left = self.find_or_create(left_set, budget);
            let right = self.find_or_create(right_set, budget);
            if self.config.use_incremental_progress {
                let (l, r) = (&self.nodes[left], &self.nodes[right]);
                if l.terminal && r.terminal && !incremental_progress_check(parent_loss, l.leaf_loss, r.leaf_loss, self.config.lambda) {
                    continue;
                }
            }
            for child in [left, right] {
                let parents = &mut self.nodes[child].parents;
                if !parents.contains(&id) {
                    parents.push(id);
                }
            }
            splits.push(SplitEntry { feature, left, right });
        }
        self.nodes[id].splits = Some(splits);
    }

    /// Main loop; returns when the root closes or a limit is hit.
    pub fn run(&mut self) -> Result<(), SolveError> {
        while !self.nodes[self.root].bounds.is_closed() {
            if self.stats.iterations.is_multiple_of(1024) {
                if let Some(limit) = self.options.time_limit {
                    if self.started.elapsed() >= limit {
                        self.stats.timed_out = true;
                        break;
                    }
                }
            }
            if let Some(limit) = self.options.node_limit {
                if self.nodes.len() > limit {
                    self.stats.elapsed = self.started.elapsed();
                    return Err(SolveError::NodeLimit {
                        limit,
                        stats: self.stats.clone(),
                    });
                }
            }
            let Some(id) = self.queue.pop() else {
                log::warn!("work queue drained with the root still open");
                break;
            };
            self.stats.iterations += 1;
            self.nodes[id].queued_version = None;
            if self.nodes[id].bounds.is_closed() {
                continue;
            }
            if self.nodes[id].splits.is_none() {
                self.expand(id);
            }
            self.update(id);
            self.nodes[id].processed = true;
            if self.nodes[id].bounds.is_closed() {
                continue;
            }
            self.enqueue_children(id);
        }
        self.stats.elapsed = self.started.elapsed();
        Ok(())
    }

    fn pair_bounds(&self, split: &SplitEntry) -> (T, T) {
        let l = &self.nodes[split.left].bounds;
        let r = &self.nodes[split.right].bounds;
        (l.lb + r.lb, l.ub + r.ub)
    }

    /// Bounds of `id` recomputed from its leaf objective and its children.
    fn refreshed_bounds(&self, id: usize) -> (BoundsPair<T>, T) {
        let node = &self.nodes[id];
        let mut lb = node.leaf_objective;
        let mut ub = node.leaf_objective;
        for split in node.splits.as_deref().unwrap_or_default() {
            let (pair_lb, pair_ub) = self.pair_bounds(split);
            lb = lb.min(pair_lb);
            ub = ub.min(pair_ub);
        }
        let old = node.bounds;
        let mut new = BoundsPair {
            lb: old.lb.max(lb),
            ub: old.ub.min(ub),
        };
        if new.lb >= new.ub - T::BOUND_SLACK {
            // snap closed nodes so sums of closed children stay closed
            new.lb = new.ub;
        }
        (new, ub)
    }

    fn update(&mut self, id: usize) {
        let old = self.nodes[id].bounds;
        let (new, raw_ub) = self.refreshed_bounds(id);
        if self.options.audit && (raw_ub > old.ub + T::BOUND_SLACK || new.lb < old.lb - T::BOUND_SLACK) {
            self.stats.monotonicity_violations += 1;
        }
        if new != old {
            let count = self.nodes[id].count;
            let node = &mut self.nodes[id];
            node.bounds = new;
            node.version += 1;
            let parents = node.parents.clone();
            let fraction = count as f64 / self.ds.n_samples() as f64;
            for parent in parents {
                let p = &self.nodes[parent];
                // a parent whose bounds would not move has nothing to do
                if p.queued_version == Some(p.version) || self.refreshed_bounds(parent).0 == p.bounds {
                    continue;
                }
                self.nodes[parent].queued_version = Some(self.nodes[parent].version);
                self.seq += 1;
                self.stats.queue_pushes += 1;
                self.queue.push(parent, fraction, new.lb.as_f64(), self.seq);
            }
        }
    }

    fn enqueue_children(&mut self, id: usize) {
        let parent_ub = self.nodes[id].bounds.ub;
        let splits = self.nodes[id].splits.clone().unwrap_or_default();
        for split in &splits {
            let (pair_lb, pair_ub) = self.pair_bounds(split);
            if pair_lb < pair_ub && pair_lb <= parent_ub {
                if self.options.audit && pair_lb > parent_ub + T::BOUND_SLACK {
                    self.stats.enqueue_violations += 1;
                }
                for child in [split.left, split.right] {
                    // a processed child is re-queued by its own children when it can change
                    if !self.nodes[child].processed && !self.nodes[child].bounds.is_closed() {
                        self.push(child);
                    }
                }
            }
        }
    }

    pub fn root_bounds(&self) -> BoundsPair<T> {
        self.nodes[self.root].bounds
    }

    pub fn stats(&self) -> &SolveStats {
        &self.stats
    }

    /// Number of distinct keys materialized (equals graph size).
    pub fn distinct_keys(&self) -> usize {
        self.index.len()
    }

    pub fn node_state(&self, key: &SupportKey) -> Option<NodeState> {
        let &id = self.index.get(key)?;
        let node = &self.nodes[id];
        if !node.bounds.is_closed() {
            return Some(NodeState::Open);
        }
        Some(match self.certificate(id) {
            None => NodeState::ClosedAsLeaf,
            Some(split) => NodeState::ClosedAsSplit(split.feature),
        })
    }

    /// Leaf (None) or the smallest-index split realizing the node's best
    /// known upper bound.
    fn certificate(&self, id: usize) -> Option<SplitEntry> {
        let node = &self.nodes[id];
        let splits = node.splits.as_deref().unwrap_or_default();
        let best = splits.iter().map(|s| self.pair_bounds(s).1).fold(T::infinity(), T::min);
        if node.leaf_objective <= best + T::BOUND_SLACK {
            return None;
        }
        splits.iter().copied().find(|s| self.pair_bounds(s).1 <= best + T::BOUND_SLACK)
    }

    fn extract_node(&self, id: usize) -> TreeNode<T> {
        match self.certificate(id) {
            None => {
                let support = &self.nodes[id].key.support;
                TreeNode::Leaf(Leaf {
                    curve: leaf_curve(support, self.ds).expect("supports are nonempty"),
                    sample_count: self.nodes[id].count,
                })
            }
            Some(split) => TreeNode::Split {
                feature: split.feature,
                name: self.ds.feature_name(split.feature).to_owned(),
                left: Box::new(self.extract_node(split.left)),
                right: Box::new(self.extract_node(split.right)),
            },
        }
    }

    /// Tree realizing the root's upper bound.
    pub fn extract_tree(&self) -> SurvivalTree<T> {
        let root = self.extract_node(self.root);
        let mut tree = SurvivalTree {
            root,
            lambda: self.config.lambda,
            max_depth: self.config.max_depth,
            objective: T::zero(),
            columns: self.ds.feature_columns().to_vec(),
        };
        let loss = tree_loss(&tree, self.ds).expect("extracted leaves partition the samples");
        tree.objective = loss + self.config.lambda * T::from_count(tree.leaf_count());
        tree
    }

    pub fn finish(self) -> SolveResult<T> {
        let tree = self.extract_tree();
        let bounds = self.root_bounds();
        let proven_optimal = bounds.is_closed();
        let gap = if proven_optimal {
            T::zero()
        } else {
            (bounds.ub - bounds.lb).max(T::zero()) / bounds.ub.max(T::epsilon())
        };
        SolveResult {
            objective: tree.objective,
            tree,
            lower_bound: bounds.lb,
            upper_bound: bounds.ub,
            proven_optimal,
            gap,
            stats: self.stats,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dominant_feature_data() -> BinaryDataset<f64> {
        // feature 0 separates early deaths from late ones, feature 1 is noise
        let rows: Vec<Vec<bool>> = (0..12).map(|i| vec![i < 6, i % 2 == 0]).collect();
        let times = (0..12).map(|i| if i < 6 { 1.0 + i as f64 } else { 20.0 + i as f64 }).collect();
        BinaryDataset::from_rows(&rows, times, vec![true; 12]).unwrap()
    }

    #[test]
    fn split_support_examples() {
        let ds = BinaryDataset::<f64>::from_rows(&[vec![false], vec![true], vec![false]], vec![1.0, 2.0, 3.0], vec![true; 3]).unwrap();
        let (l, r) = split_support(&ds.all_samples(), 0, &ds);
        assert_eq!(l.iter().collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(r.iter().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn huge_penalty_gives_single_leaf_in_one_iteration() {
        let ds = dominant_feature_data();
        let config = BoundConfig::new(10.0, Some(3)).with_min_leaf(1);
        let result = solve(&ds, &config, SolverOptions::default()).unwrap();
        assert_eq!(result.tree.leaf_count(), 1);
        assert!(result.proven_optimal);
        assert!(result.stats.iterations <= 1);
    }

    #[test]
    fn dominant_feature_is_chosen() {
        let ds = dominant_feature_data();
        let config = BoundConfig::new(0.01, Some(1)).with_min_leaf(2);
        let result = solve(&ds, &config, SolverOptions::default()).unwrap();
        assert!(result.proven_optimal);
        match &result.tree.root {
            TreeNode::Split { feature, .. } => assert_eq!(*feature, 0),
            TreeNode::Leaf(_) => panic!("expected a split"),
        }
        assert!((result.objective - result.upper_bound).abs() < 1e-10);
    }

    #[test]
    fn too_few_samples() {
        let ds = dominant_feature_data();
        let config = BoundConfig::new(0.01, Some(2)).with_min_leaf(20);
        assert!(matches!(solve(&ds, &config, SolverOptions::default()), Err(SolveError::TooFewSamples { .. })));
    }

    #[test]
    fn node_limit_reports_stats() {
        let ds = dominant_feature_data();
        let config = BoundConfig::new(0.0, Some(2)).with_min_leaf(1).without_optional_bounds();
        let options = SolverOptions {
            node_limit: Some(2),
            ..SolverOptions::default()
        };
        match solve(&ds, &config, options) {
            Err(SolveError::NodeLimit { stats, .. }) => assert!(stats.graph_size > 2),
            other => panic!("expected node limit, got {other:?}"),
        }
    }
}
