//! Censored-loss mathematics: per-sample and per-leaf integrated Brier score
//! under inverse-probability-of-censoring weights, and the equivalent-point
//! floor.
//!
//! Every loss carries the global factor `1 / (y_max * N)`, so sample, leaf and
//! tree losses add up directly and compare against the per-leaf penalty.

use thiserror::Error;

use crate::bitset::Bitset;
use crate::dataset::{BinaryDataset, EquivalentSet};
use crate::num::{CompensatedSum, Real};
use crate::step::StepFunction;
use crate::tree::SurvivalTree;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LossError {
    #[error("leaf support is empty")]
    EmptySupport,
    #[error("sample {0} is covered by more than one leaf")]
    Overlap(usize),
    #[error("sample {0} is not covered by any leaf")]
    Uncovered(usize),
    #[error("support size {support} does not match dataset size {samples}")]
    SizeMismatch { support: usize, samples: usize },
}

/// A fitted leaf: its support, Kaplan-Meier curve and loss.
#[derive(Clone, Debug)]
pub struct LeafModel<T> {
    pub support: Bitset,
    pub curve: StepFunction<T>,
    pub toward_one: Vec<T>,
    pub toward_zero: Vec<T>,
    pub loss: T,
    pub sample_count: usize,
}

/// Per-time-index tallies of a support.
struct Tally<T> {
    at_time: Vec<usize>,
    deaths: Vec<usize>,
    death_weight: Vec<T>,
    count: usize,
}

fn tally<T: Real>(support: &Bitset, ds: &BinaryDataset<T>) -> Tally<T> {
    let k = ds.grid.len();
    let mut at_time = vec![0; k];
    let mut deaths = vec![0; k];
    let mut death_weight = vec![T::zero(); k];
    let mut count = 0;
    for i in support.iter() {
        let w = &ds.weights[i];
        at_time[w.time_index] += 1;
        if ds.events[i] {
            deaths[w.time_index] += 1;
            death_weight[w.time_index] = death_weight[w.time_index] + w.death_weight;
        }
        count += 1;
    }
    Tally {
        at_time,
        deaths,
        death_weight,
        count,
    }
}

/// Leaf loss without materializing the curve; `O(|support| + K)`.
pub fn leaf_loss_value<T: Real>(support: &Bitset, ds: &BinaryDataset<T>) -> T {
    let t = tally(support, ds);
    let grid = &ds.grid;
    let mut at_risk = t.count;
    let mut survival = T::one();
    let mut death_mass = T::zero();
    let mut acc = CompensatedSum::new();
    for k in 0..grid.len() {
        // piece k starts at t_{k-1}; deaths at t_{k-1} already count toward zero
        if k > 0 {
            death_mass = death_mass + t.death_weight[k - 1];
        }
        let alive_weight = T::from_count(at_risk) * grid.inverse_censoring[k];
        let term = alive_weight * (survival - T::one()).powi(2) + death_mass * survival * survival;
        acc.add(grid.interval_lengths[k] * term);

        if t.deaths[k] > 0 {
            survival = survival * (T::one() - T::from_count(t.deaths[k]) / T::from_count(at_risk));
        }
        at_risk -= t.at_time[k];
    }
    acc.value() * ds.normalizer()
}

/// Kaplan-Meier curve of the samples in `support`.
pub fn leaf_curve<T: Real>(support: &Bitset, ds: &BinaryDataset<T>) -> Result<StepFunction<T>, LossError> {
    let t = tally(support, ds);
    if t.count == 0 {
        return Err(LossError::EmptySupport);
    }
    let mut at_risk = t.count;
    let mut survival = T::one();
    let mut breakpoints = Vec::new();
    let mut values = Vec::new();
    for k in 0..ds.grid.len() {
        if t.deaths[k] > 0 {
            survival = survival * (T::one() - T::from_count(t.deaths[k]) / T::from_count(at_risk));
            breakpoints.push(ds.grid.breakpoints[k]);
            values.push(survival);
        }
        at_risk -= t.at_time[k];
    }
    Ok(StepFunction::new(breakpoints, values, T::one()).expect("grid is sorted"))
}

/// Fit a leaf on `support` and compute its loss from aggregated weights.
pub fn leaf_loss<T: Real>(support: &Bitset, ds: &BinaryDataset<T>) -> Result<LeafModel<T>, LossError> {
    if support.capacity() != ds.n_samples() {
        return Err(LossError::SizeMismatch {
            support: support.capacity(),
            samples: ds.n_samples(),
        });
    }
    let curve = leaf_curve(support, ds)?;
    let (toward_one, toward_zero) = ds.aggregate(support.iter());
    let on_grid = curve.on_grid(&ds.grid.breakpoints);
    let loss = compensated_terms(&toward_one, &toward_zero, &on_grid, &ds.grid.interval_lengths) * ds.normalizer();
    Ok(LeafModel {
        support: support.clone(),
        sample_count: support.count(),
        curve,
        toward_one,
        toward_zero,
        loss,
    })
}

fn compensated_terms<T: Real>(a: &[T], b: &[T], s: &[T], dt: &[T]) -> T {
    let mut acc = CompensatedSum::new();
    for k in 0..a.len() {
        acc.add(dt[k] * (a[k] * (s[k] - T::one()).powi(2) + b[k] * s[k] * s[k]));
    }
    acc.value()
}

/// Exact integrals of `(S - 1)^2` and `S^2` over each grid piece, for a curve
/// whose breakpoints need not lie on the grid.
pub fn curve_integrals<T: Real>(curve: &StepFunction<T>, ds: &BinaryDataset<T>) -> (Vec<T>, Vec<T>) {
    let grid = &ds.grid;
    let bps = curve.breakpoints();
    let vals = curve.values();
    let mut j = 0;
    let mut current = curve.initial();
    let mut start = T::zero();
    let mut toward_one = Vec::with_capacity(grid.len());
    let mut toward_zero = Vec::with_capacity(grid.len());
    for &end in &grid.breakpoints {
        let mut one = CompensatedSum::new();
        let mut zero = CompensatedSum::new();
        let mut left = start;
        while j < bps.len() && bps[j] <= left {
            current = vals[j];
            j += 1;
        }
        while j < bps.len() && bps[j] < end {
            let w = bps[j] - left;
            one.add(w * (current - T::one()).powi(2));
            zero.add(w * current * current);
            left = bps[j];
            current = vals[j];
            j += 1;
        }
        let w = end - left;
        one.add(w * (current - T::one()).powi(2));
        zero.add(w * current * current);
        toward_one.push(one.value());
        toward_zero.push(zero.value());
        start = end;
    }
    (toward_one, toward_zero)
}

/// Loss of one sample predicted by `curve`.
pub fn sample_loss<T: Real>(curve: &StepFunction<T>, i: usize, ds: &BinaryDataset<T>) -> T {
    let (one, zero) = curve_integrals(curve, ds);
    sample_loss_from_integrals(&one, &zero, i, ds)
}

pub(crate) fn sample_loss_from_integrals<T: Real>(one: &[T], zero: &[T], i: usize, ds: &BinaryDataset<T>) -> T {
    let w = &ds.weights[i];
    let mut acc = CompensatedSum::new();
    for k in 0..=w.time_index {
        acc.add(ds.grid.inverse_censoring[k] * one[k]);
    }
    if w.death_weight > T::zero() {
        for k in w.time_index + 1..ds.grid.len() {
            acc.add(w.death_weight * zero[k]);
        }
    }
    acc.value() * ds.normalizer()
}

/// Summed loss of `members` all predicted by the same `curve`.
pub fn curve_loss<T: Real>(curve: &StepFunction<T>, members: &Bitset, ds: &BinaryDataset<T>) -> T {
    let (one, zero) = curve_integrals(curve, ds);
    let (a, b) = ds.aggregate(members.iter());
    let mut acc = CompensatedSum::new();
    for k in 0..a.len() {
        acc.add(a[k] * one[k] + b[k] * zero[k]);
    }
    acc.value() * ds.normalizer()
}

/// Loss of a partition of the samples into curve-labelled groups.
pub fn partition_loss<T: Real>(groups: &[(Bitset, &StepFunction<T>)], ds: &BinaryDataset<T>) -> Result<T, LossError> {
    let n = ds.n_samples();
    let mut covered = Bitset::empty(n);
    for (support, _) in groups {
        if support.capacity() != n {
            return Err(LossError::SizeMismatch {
                support: support.capacity(),
                samples: n,
            });
        }
        if let Some(i) = support.and(&covered).iter().next() {
            return Err(LossError::Overlap(i));
        }
        covered = covered.or(support);
    }
    if let Some(i) = Bitset::full(n).and_not(&covered).iter().next() {
        return Err(LossError::Uncovered(i));
    }
    let mut acc = CompensatedSum::new();
    for (support, curve) in groups {
        if !support.is_empty() {
            acc.add(curve_loss(curve, support, ds));
        }
    }
    Ok(acc.value())
}

/// Integrated Brier score of a tree on `ds`, using the leaves' stored curves.
pub fn tree_loss<T: Real>(tree: &SurvivalTree<T>, ds: &BinaryDataset<T>) -> Result<T, LossError> {
    let routed = tree.route_all(ds);
    let groups: Vec<(Bitset, &StepFunction<T>)> = tree
        .leaves()
        .into_iter()
        .zip(routed)
        .map(|(leaf, support)| (support, &leaf.curve))
        .collect();
    partition_loss(&groups, ds)
}

/// Pointwise-optimal loss for aggregated weights `a` (toward one) and `b`
/// (toward zero): `sum_k dt_k * a_k b_k / (a_k + b_k)`.
pub fn equivalent_loss_from_sums<T: Real>(a: &[T], b: &[T], ds: &BinaryDataset<T>) -> T {
    let mut acc = CompensatedSum::new();
    for k in 0..a.len() {
        let total = a[k] + b[k];
        if total > T::zero() {
            acc.add(ds.grid.interval_lengths[k] * a[k] * b[k] / total);
        }
    }
    acc.value() * ds.normalizer()
}

/// Unavoidable loss of an equivalence class under the best possible step function.
pub fn equivalent_loss<T: Real>(set: &EquivalentSet<T>, ds: &BinaryDataset<T>) -> T {
    equivalent_loss_from_sums(&set.toward_one, &set.toward_zero, ds)
}

/// Pointwise minimizer `a_k / (a_k + b_k)` (one where undetermined).
pub fn optimal_step_values<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| if x + y > T::zero() { x / (x + y) } else { T::one() })
        .collect()
}

/// Sum of class floors over classes contained in `support`.
pub fn equivalent_floor<T: Real>(support: &Bitset, ds: &BinaryDataset<T>) -> T {
    let mut acc = CompensatedSum::new();
    for i in support.iter() {
        let class = &ds.classes[ds.class_of(i)];
        if class.members[0] == i {
            debug_assert!(class.members.iter().all(|&m| support.contains(m)), "equivalence class split across supports");
            acc.add(class.equivalent_loss);
        }
    }
    acc.value()
}
