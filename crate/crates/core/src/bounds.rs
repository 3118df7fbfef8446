//! Initial bounds for subproblems and the pruning predicates that close a
//! subproblem without splitting it.

use thiserror::Error;

use crate::bitset::Bitset;
use crate::dataset::BinaryDataset;
use crate::num::{compensated_sum, Real};
use crate::survival::{equivalent_floor, leaf_loss_value};

#[derive(Debug, Error, PartialEq)]
pub enum BoundError {
    #[error("lambda must be finite and nonnegative, got {0}")]
    InvalidLambda(f64),
    #[error("minimum leaf size must be at least 1")]
    ZeroMinLeaf,
    #[error("depth limit must be at least 1")]
    ZeroDepth,
    #[error("support of {size} samples is below the minimum leaf size {min}")]
    SupportTooSmall { size: usize, min: usize },
    #[error("reference losses cover {got} samples, dataset has {expected}")]
    ReferenceLength { got: usize, expected: usize },
    #[error("reference loss for sample {0} is negative or not finite")]
    InvalidReference(usize),
}

/// Search parameters and switches for the optional bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundConfig<T> {
    /// Penalty per leaf.
    pub lambda: T,
    /// Maximum number of splits on any root-to-leaf path; `None` is unlimited.
    pub max_depth: Option<usize>,
    pub min_leaf_size: usize,
    pub use_equivalent_points: bool,
    /// Count a split as at least two leaves when bounding a subproblem.
    pub use_lookahead: bool,
    /// Close leaves whose loss is below `lambda`; skip leaf pairs that do not
    /// improve on their parent by `lambda`.
    pub use_incremental_progress: bool,
    /// Tighten depth budgets using the leaf-count cap implied by the incumbent.
    pub use_leaf_caps: bool,
    /// Per-sample losses of a reference model; enables the guessed lower bound.
    pub reference_losses: Option<Vec<T>>,
}

impl<T: Real> BoundConfig<T> {
    pub fn new(lambda: T, max_depth: Option<usize>) -> Self {
        Self {
            lambda,
            max_depth,
            min_leaf_size: 7,
            use_equivalent_points: true,
            use_lookahead: true,
            use_incremental_progress: true,
            use_leaf_caps: true,
            reference_losses: None,
        }
    }

    pub fn with_min_leaf(mut self, min_leaf_size: usize) -> Self {
        self.min_leaf_size = min_leaf_size;
        self
    }

    /// Same objective, every optional bound switched off.
    pub fn without_optional_bounds(mut self) -> Self {
        self.use_equivalent_points = false;
        self.use_lookahead = false;
        self.use_incremental_progress = false;
        self.use_leaf_caps = false;
        self.reference_losses = None;
        self
    }

    pub fn validate(&self, n_samples: usize) -> Result<(), BoundError> {
        if !(self.lambda.is_finite() && self.lambda >= T::zero()) {
            return Err(BoundError::InvalidLambda(self.lambda.as_f64()));
        }
        if self.min_leaf_size == 0 {
            return Err(BoundError::ZeroMinLeaf);
        }
        if self.max_depth == Some(0) {
            return Err(BoundError::ZeroDepth);
        }
        if let Some(reference) = &self.reference_losses {
            if reference.len() != n_samples {
                return Err(BoundError::ReferenceLength {
                    got: reference.len(),
                    expected: n_samples,
                });
            }
            if let Some(i) = reference.iter().position(|r| !(r.is_finite() && *r >= T::zero())) {
                return Err(BoundError::InvalidReference(i));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundsPair<T> {
    pub lb: T,
    pub ub: T,
}

impl<T: Real> BoundsPair<T> {
    pub fn is_closed(&self) -> bool {
        self.lb >= self.ub - T::BOUND_SLACK
    }
}

/// Objective of leaving `support` as a single leaf.
pub fn initial_upper_bound<T: Real>(support: &Bitset, ds: &BinaryDataset<T>, config: &BoundConfig<T>) -> Result<T, BoundError> {
    let size = support.count();
    if size < config.min_leaf_size {
        return Err(BoundError::SupportTooSmall {
            size,
            min: config.min_leaf_size,
        });
    }
    Ok(leaf_loss_value(support, ds) + config.lambda)
}

/// Lower bound on any subtree over `support`, given its leaf objective `ub`.
pub fn initial_lower_bound<T: Real>(support: &Bitset, ds: &BinaryDataset<T>, config: &BoundConfig<T>, ub: T) -> Result<T, BoundError> {
    let split_leaves = if config.use_lookahead { 2 } else { 1 };
    let floor = if config.use_equivalent_points {
        equivalent_floor(support, ds)
    } else {
        T::zero()
    };
    let mut lb = config.lambda * T::from_count(split_leaves) + floor;
    if let Some(reference) = &config.reference_losses {
        if reference.len() != ds.n_samples() {
            return Err(BoundError::ReferenceLength {
                got: reference.len(),
                expected: ds.n_samples(),
            });
        }
        let guess = config.lambda + compensated_sum(support.iter().map(|i| reference[i]));
        lb = lb.max(guess);
    }
    Ok(lb.min(ub))
}

/// What `fails_bounds` needs to know about a freshly created subproblem.
#[derive(Clone, Copy, Debug)]
pub struct NodeSummary<T> {
    pub leaf_loss: T,
    pub sample_count: usize,
    pub depth_budget: usize,
    pub bounds: BoundsPair<T>,
}

/// True when the subproblem must stay a leaf.
pub fn fails_bounds<T: Real>(node: &NodeSummary<T>, config: &BoundConfig<T>) -> bool {
    node.depth_budget == 0
        || (config.use_incremental_progress && node.leaf_loss < config.lambda)
        || node.sample_count < 2 * config.min_leaf_size
        || node.bounds.is_closed()
}

/// One-step lookahead: every extension of a partial tree with `leaves`
/// leaves and fixed loss `fixed_loss` is worse than `incumbent`.
pub fn lookahead_prune<T: Real>(fixed_loss: T, leaves: usize, incumbent: T, lambda: T) -> bool {
    fixed_loss + lambda * T::from_count(leaves) + lambda > incumbent
}

/// A terminal split must reduce its parent's loss by at least `lambda`.
pub fn incremental_progress_check<T: Real>(parent_loss: T, left_loss: T, right_loss: T, lambda: T) -> bool {
    parent_loss - left_loss - right_loss >= lambda
}

/// Cap on the leaves of any optimal tree: `min(floor(R / lambda), 2^M)`.
pub fn leaf_count_cap<T: Real>(incumbent: T, lambda: T, n_features: usize) -> usize {
    let structural = if n_features >= usize::BITS as usize - 1 {
        usize::MAX
    } else {
        1usize << n_features
    };
    if lambda <= T::zero() {
        return structural;
    }
    let ratio = (incumbent / lambda).floor();
    match ratio.to_usize() {
        Some(cap) => cap.min(structural),
        None => structural,
    }
}

/// Parent-specific cap `H + floor((R - fixed - lambda H) / lambda)`, also
/// bounded by `2^M`.
pub fn parent_leaf_cap<T: Real>(incumbent: T, lambda: T, fixed_loss: T, leaves: usize, n_features: usize) -> usize {
    let structural = leaf_count_cap(T::infinity(), T::one(), n_features);
    if lambda <= T::zero() {
        return structural;
    }
    let slack = ((incumbent - fixed_loss - lambda * T::from_count(leaves)) / lambda).floor();
    if slack < T::zero() {
        return leaves.saturating_sub(slack.abs().to_usize().unwrap_or(usize::MAX)).min(structural);
    }
    leaves.saturating_add(slack.to_usize().unwrap_or(usize::MAX)).min(structural)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fails_bounds_examples() {
        let config = BoundConfig::new(0.01, Some(3)).with_min_leaf(1);
        let open = BoundsPair { lb: 0.1, ub: 0.5 };
        let node = |leaf_loss, depth_budget, sample_count| NodeSummary {
            leaf_loss,
            sample_count,
            depth_budget,
            bounds: open,
        };
        assert!(fails_bounds(&node(0.5, 0, 100), &config));
        assert!(fails_bounds(&node(0.004, 3, 100), &config));
        assert!(!fails_bounds(&node(0.5, 3, 100), &config));
        let closed = NodeSummary {
            bounds: BoundsPair { lb: 0.5, ub: 0.5 },
            ..node(0.5, 3, 100)
        };
        assert!(fails_bounds(&closed, &config));
        let seven = BoundConfig::new(0.01, Some(3));
        assert!(fails_bounds(&node(0.5, 3, 13), &seven));
        assert!(!fails_bounds(&node(0.5, 3, 14), &seven));
    }

    #[test]
    fn lookahead_examples() {
        assert!(!lookahead_prune(0.10, 3, 0.15, 0.01));
        assert!(lookahead_prune(0.10, 3, 0.135, 0.01));
        // equality is not pruned
        assert!(!lookahead_prune(0.5, 2, 0.5 + 0.25 + 0.125, 0.125));
    }

    #[test]
    fn incremental_progress_examples() {
        assert!(incremental_progress_check(0.20, 0.10, 0.05, 0.01));
        assert!(!incremental_progress_check(0.20, 0.195, 0.004, 0.01));
        assert!(incremental_progress_check(0.2, 0.1, 0.1, 0.0));
    }

    #[test]
    fn leaf_cap_examples() {
        assert_eq!(leaf_count_cap(0.1, 0.01, 20), 10);
        assert_eq!(leaf_count_cap(0.5, 0.1, 2), 4);
        assert_eq!(leaf_count_cap(0.5, 0.0, 5), 32);
        assert_eq!(leaf_count_cap(0.5, 0.0, 200), usize::MAX);
        assert_eq!(parent_leaf_cap(0.1, 0.01, 0.03, 2, 20), 2 + 5);
    }

    #[test]
    fn config_validation() {
        let n = 4;
        assert!(BoundConfig::new(-1.0, Some(2)).validate(n).is_err());
        assert_eq!(BoundConfig::new(0.1, Some(2)).with_min_leaf(0).validate(n), Err(BoundError::ZeroMinLeaf));
        let mut with_ref = BoundConfig::new(0.1, Some(2));
        with_ref.reference_losses = Some(vec![0.0; 3]);
        assert_eq!(with_ref.validate(n), Err(BoundError::ReferenceLength { got: 3, expected: 4 }));
        with_ref.reference_losses = Some(vec![0.0, 0.0, -1.0, 0.0]);
        assert_eq!(with_ref.validate(n), Err(BoundError::InvalidReference(2)));
    }
}
